#pragma once

// Limited-memory BFGS step with a diagonal initial Hessian, Armijo
// backtracking, periodic coordinates and non-negativity bounds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "errors.hpp"

namespace superlse {

struct LbfgsOptions {
    std::size_t memory = 10;
    double armijo = 1e-4;
    double shrink = 0.5;
    std::size_t max_backtracks = 30;
};

class LbfgsMemory {
public:
    explicit LbfgsMemory(std::size_t capacity = 10) : capacity_(std::max<std::size_t>(capacity, 1)) {}

    // Clears the stored pairs and installs a new diagonal Hessian estimate.
    void reset(std::vector<double> diag_init) {
        pairs_.clear();
        diag_ = std::move(diag_init);
    }

    std::size_t dimension() const { return diag_.size(); }
    std::size_t size() const { return pairs_.size(); }
    std::size_t capacity() const { return capacity_; }
    const std::vector<double>& diag_init() const { return diag_; }

    // Stores (s, y) when the curvature condition s'y > 0 holds.
    bool push(std::vector<double> s, std::vector<double> y) {
        double sy = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) sy += s[i] * y[i];
        if (!(sy > 0.0) || !std::isfinite(sy)) return false;
        pairs_.push_back({std::move(s), std::move(y), 1.0 / sy});
        if (pairs_.size() > capacity_) pairs_.pop_front();
        return true;
    }

    // -H g by the two-loop recursion with H0 = diag_init^{-1}.
    std::vector<double> direction(std::span<const double> g) const {
        const std::size_t n = g.size();
        std::vector<double> q(g.begin(), g.end());
        std::vector<double> alpha(pairs_.size());
        for (std::size_t i = pairs_.size(); i-- > 0;) {
            const auto& p = pairs_[i];
            alpha[i] = p.rho * dot(p.s, q);
            for (std::size_t j = 0; j < n; ++j) q[j] -= alpha[i] * p.y[j];
        }
        for (std::size_t j = 0; j < n; ++j) q[j] /= diag_[j];
        for (std::size_t i = 0; i < pairs_.size(); ++i) {
            const auto& p = pairs_[i];
            const double b = p.rho * dot(p.y, q);
            for (std::size_t j = 0; j < n; ++j) q[j] += p.s[j] * (alpha[i] - b);
        }
        for (auto& v : q) v = -v;
        return q;
    }

private:
    struct Pair {
        std::vector<double> s, y;
        double rho;
    };

    static double dot(std::span<const double> a, std::span<const double> b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
        return acc;
    }

    std::size_t capacity_;
    std::deque<Pair> pairs_;
    std::vector<double> diag_;
};

// Per-coordinate constraints: periodic coordinates are wrapped to [0, 1),
// non-negative coordinates limit the step so they stay >= 0.
struct LbfgsLayout {
    std::vector<bool> periodic;
    std::vector<bool> nonnegative;
};

enum class LbfgsStatus { Accepted, Converged, LineSearchFailed };

struct LbfgsStep {
    LbfgsStatus status = LbfgsStatus::Converged;
    std::vector<double> point;
    double value = 0.0;
    std::vector<double> gradient;
    double sq_newton_decrement = 0.0;
    double step_length = 0.0;
    std::size_t evaluations = 0;
};

// One step from x (value f0, gradient g0).  objective returns nullopt when
// the trial point is infeasible; gradient is only called at the accepted
// point.  The step is skipped when g' H g < decrement_tol.
inline LbfgsStep lbfgs_step(LbfgsMemory& memory, std::span<const double> x, double f0, std::span<const double> g0,
                            const std::function<std::optional<double>(const std::vector<double>&)>& objective,
                            const std::function<std::vector<double>(const std::vector<double>&)>& gradient,
                            const LbfgsLayout& layout, double decrement_tol, const LbfgsOptions& opt = {}) {
    const std::size_t n = x.size();
    if (memory.dimension() != n || g0.size() != n) throw DimensionMismatch("L-BFGS memory dimension differs from point");
    LbfgsStep out;
    out.point.assign(x.begin(), x.end());
    out.value = f0;
    out.gradient.assign(g0.begin(), g0.end());

    std::vector<double> d = memory.direction(g0);
    double gd = 0.0;
    for (std::size_t i = 0; i < n; ++i) gd += g0[i] * d[i];
    if (!(gd < 0.0) && memory.size() > 0) {
        // Stored curvature pairs produced an ascent direction; fall back.
        LbfgsMemory fresh(memory.capacity());
        fresh.reset(memory.diag_init());
        memory = fresh;
        d = memory.direction(g0);
        gd = 0.0;
        for (std::size_t i = 0; i < n; ++i) gd += g0[i] * d[i];
    }
    out.sq_newton_decrement = std::max(-gd, 0.0);
    if (!(out.sq_newton_decrement > 0.0) || out.sq_newton_decrement < decrement_tol || n == 0) {
        out.status = LbfgsStatus::Converged;
        return out;
    }

    double max_step = 1.0;
    for (std::size_t i = 0; i < n; ++i)
        if (layout.nonnegative.size() > i && layout.nonnegative[i] && d[i] < 0.0)
            max_step = std::min(max_step, -x[i] / d[i]);

    double step = max_step;
    std::vector<double> trial(n);
    for (std::size_t b = 0; b <= opt.max_backtracks; ++b, step *= opt.shrink) {
        if (!(step > 0.0)) break;
        for (std::size_t i = 0; i < n; ++i) {
            double v = x[i] + step * d[i];
            if (layout.periodic.size() > i && layout.periodic[i]) {
                v -= std::floor(v);
                if (v >= 1.0) v = 0.0;
            }
            if (layout.nonnegative.size() > i && layout.nonnegative[i]) v = std::max(v, 0.0);
            trial[i] = v;
        }
        ++out.evaluations;
        auto f = objective(trial);
        if (f && std::isfinite(*f) && *f <= f0 + opt.armijo * step * gd) {
            out.status = LbfgsStatus::Accepted;
            out.point = trial;
            out.value = *f;
            out.gradient = gradient(trial);
            out.step_length = step;
            std::vector<double> s(n), y(n);
            for (std::size_t i = 0; i < n; ++i) {
                const bool wraps = layout.periodic.size() > i && layout.periodic[i];
                s[i] = wraps ? step * d[i] : trial[i] - x[i];
                y[i] = out.gradient[i] - g0[i];
            }
            memory.push(std::move(s), std::move(y));
            return out;
        }
    }
    out.status = LbfgsStatus::LineSearchFailed;
    return out;
}

}  // namespace superlse
