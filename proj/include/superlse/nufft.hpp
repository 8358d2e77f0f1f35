#pragma once

// Steering-vector products psi(theta)_n = exp(j 2 pi n theta), n = 0..N-1,
// through direct summation or Gaussian-gridding NUFFT, and Gram matrices of
// weighted steering vectors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "fft.hpp"

namespace superlse {

enum class NufftMethod { Auto, Direct, Gridding };

// Size from which Auto switches from direct summation to gridding.
inline constexpr std::size_t kNufftMinSize = 512;

inline double wrap_unit(double x) {
    double w = x - std::floor(x);
    if (w >= 1.0) w = 0.0;
    return w;
}

class FrequencySet {
public:
    FrequencySet() = default;
    explicit FrequencySet(std::vector<double> thetas) : thetas_(std::move(thetas)) {
        for (double t : thetas_)
            if (!(t >= 0.0 && t < 1.0)) throw InvalidFrequency("frequency outside [0, 1)");
    }
    std::size_t size() const { return thetas_.size(); }
    bool empty() const { return thetas_.empty(); }
    double operator[](std::size_t i) const { return thetas_[i]; }
    std::span<const double> values() const { return thetas_; }

private:
    std::vector<double> thetas_;
};

namespace detail {

// Direct sums with a phasor recurrence, resynchronised every 32 samples.
inline void direct_adjoint(std::span<const double> thetas, std::span<const cplx> x, std::span<cplx> out) {
    const std::size_t n = x.size();
    for (std::size_t k = 0; k < thetas.size(); ++k) {
        const double w = -kTwoPi * thetas[k];
        const cplx step = std::polar(1.0, w);
        cplx acc(0.0), ph(1.0);
        for (std::size_t i = 0; i < n; ++i) {
            if ((i & 31u) == 0) ph = std::polar(1.0, w * static_cast<double>(i));
            acc += x[i] * ph;
            ph *= step;
        }
        out[k] = acc;
    }
}

inline void direct_forward(std::span<const double> thetas, std::span<const cplx> a, std::span<cplx> out) {
    std::fill(out.begin(), out.end(), cplx(0.0));
    const std::size_t n = out.size();
    for (std::size_t k = 0; k < thetas.size(); ++k) {
        const double w = kTwoPi * thetas[k];
        const cplx step = std::polar(1.0, w);
        cplx ph(1.0);
        for (std::size_t i = 0; i < n; ++i) {
            if ((i & 31u) == 0) ph = std::polar(1.0, w * static_cast<double>(i));
            out[i] += a[k] * ph;
            ph *= step;
        }
    }
}

// Gaussian gridding for N modes centred at c = N/2 on an oversampled grid
// of size >= 2N.  Accuracy is about exp(-pi * spread * (R - 1/2) / R).
struct Gridding {
    static constexpr std::size_t kSpread = 14;

    std::size_t n, grid, center;
    double tau, norm;
    std::vector<double> deconv;  // exp(tau n'^2) for each mode

    explicit Gridding(std::size_t modes) : n(modes) {
        grid = std::max(fft::next_pow2(2 * n), 4 * kSpread);
        center = n / 2;
        const double r = static_cast<double>(grid) / static_cast<double>(n);
        const double nn = static_cast<double>(n);
        tau = kPi * static_cast<double>(kSpread) / (nn * nn * r * (r - 0.5));
        norm = std::sqrt(kPi / tau) / static_cast<double>(grid);
        deconv.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double m = static_cast<double>(i) - static_cast<double>(center);
            deconv[i] = std::exp(tau * m * m);
        }
    }

    std::size_t slot(std::size_t i) const {
        const auto m = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(center);
        const auto g = static_cast<std::ptrdiff_t>(grid);
        return static_cast<std::size_t>(((m % g) + g) % g);
    }

    // Kernel weights for the 2*kSpread grid points around theta; returns
    // the first grid index (may be negative, to be wrapped).
    std::ptrdiff_t kernel(double theta, double* w) const {
        const double t = theta * static_cast<double>(grid);
        const double m0 = std::floor(t);
        const double frac = t - m0;
        const double step = kTwoPi / static_cast<double>(grid);
        const double inv4tau = 1.0 / (4.0 * tau);
        for (std::size_t j = 0; j < 2 * kSpread; ++j) {
            const double d = step * (frac + static_cast<double>(kSpread) - 1.0 - static_cast<double>(j));
            w[j] = std::exp(-d * d * inv4tau);
        }
        return static_cast<std::ptrdiff_t>(m0) - static_cast<std::ptrdiff_t>(kSpread) + 1;
    }

    std::size_t wrap(std::ptrdiff_t m) const {
        const auto g = static_cast<std::ptrdiff_t>(grid);
        return static_cast<std::size_t>(((m % g) + g) % g);
    }

    void adjoint(std::span<const double> thetas, std::span<const cplx> x, std::span<cplx> out) const {
        CVector buf(grid, cplx(0.0));
        for (std::size_t i = 0; i < n; ++i) buf[slot(i)] = x[i] * deconv[i];
        fft::forward(buf);
        double w[2 * kSpread];
        for (std::size_t k = 0; k < thetas.size(); ++k) {
            const std::ptrdiff_t first = kernel(thetas[k], w);
            cplx acc(0.0);
            for (std::size_t j = 0; j < 2 * kSpread; ++j)
                acc += w[j] * buf[wrap(first + static_cast<std::ptrdiff_t>(j))];
            out[k] = acc * norm *
                     std::polar(1.0, -kTwoPi * static_cast<double>(center) * thetas[k]);
        }
    }

    void forward(std::span<const double> thetas, std::span<const cplx> a, std::span<cplx> out) const {
        CVector buf(grid, cplx(0.0));
        double w[2 * kSpread];
        for (std::size_t k = 0; k < thetas.size(); ++k) {
            const cplx b = a[k] * norm *
                           std::polar(1.0, kTwoPi * static_cast<double>(center) * thetas[k]);
            const std::ptrdiff_t first = kernel(thetas[k], w);
            for (std::size_t j = 0; j < 2 * kSpread; ++j)
                buf[wrap(first + static_cast<std::ptrdiff_t>(j))] += w[j] * b;
        }
        fft::backward(buf);
        for (std::size_t i = 0; i < n; ++i) out[i] = buf[slot(i)] * deconv[i];
    }
};

inline bool use_gridding(NufftMethod method, std::size_t n) {
    switch (method) {
        case NufftMethod::Direct: return false;
        case NufftMethod::Gridding: return n >= 16;
        case NufftMethod::Auto: return n >= kNufftMinSize;
    }
    return false;
}

}  // namespace detail

// x_k = sum_n x_n exp(-j 2 pi n theta_k), i.e. Psi^H x, for raw frequencies
// (any real value; the sums are 1-periodic).
inline CVector steer_adjoint_raw(std::span<const double> thetas, std::span<const cplx> x,
                                 NufftMethod method = NufftMethod::Auto) {
    CVector out(thetas.size());
    if (thetas.empty()) return out;
    if (x.empty()) {
        std::fill(out.begin(), out.end(), cplx(0.0));
        return out;
    }
    if (detail::use_gridding(method, x.size())) {
        std::vector<double> w(thetas.size());
        for (std::size_t k = 0; k < w.size(); ++k) w[k] = wrap_unit(thetas[k]);
        detail::Gridding(x.size()).adjoint(w, x, out);
    } else {
        detail::direct_adjoint(thetas, x, out);
    }
    return out;
}

// y_n = sum_k a_k exp(j 2 pi n theta_k), i.e. Psi a.
inline CVector steer_forward_raw(std::span<const double> thetas, std::span<const cplx> a, std::size_t n,
                                 NufftMethod method = NufftMethod::Auto) {
    if (a.size() != thetas.size()) throw DimensionMismatch("steer_forward: coefficient count differs from K");
    CVector out(n, cplx(0.0));
    if (thetas.empty() || n == 0) return out;
    if (detail::use_gridding(method, n)) {
        std::vector<double> w(thetas.size());
        for (std::size_t k = 0; k < w.size(); ++k) w[k] = wrap_unit(thetas[k]);
        detail::Gridding(n).forward(w, a, out);
    } else {
        detail::direct_forward(thetas, a, out);
    }
    return out;
}

inline CVector steer_forward(const FrequencySet& f, std::span<const cplx> a, std::size_t n,
                             NufftMethod method = NufftMethod::Auto) {
    return steer_forward_raw(f.values(), a, n, method);
}

inline CVector steer_adjoint(const FrequencySet& f, std::span<const cplx> x,
                             NufftMethod method = NufftMethod::Auto) {
    return steer_adjoint_raw(f.values(), x, method);
}

// G[i, k] = sum_n w_n exp(j 2 pi n (theta_col_k - theta_row_i)) with w a
// full-length weight vector (zero at unobserved indices).  This is
// W(theta_row_i - theta_col_k) with W(phi) = sum_n w_n exp(-j 2 pi n phi),
// evaluated at all differences in one transform.
inline Eigen::MatrixXcd gram_full(std::span<const double> rows, std::span<const double> cols,
                                  std::span<const double> weights, NufftMethod method = NufftMethod::Auto) {
    const auto nr = static_cast<Eigen::Index>(rows.size());
    const auto nc = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXcd g(nr, nc);
    if (nr == 0 || nc == 0) return g;
    CVector w(weights.begin(), weights.end());
    std::vector<double> diffs;
    diffs.reserve(rows.size() * cols.size());
    for (Eigen::Index k = 0; k < nc; ++k)
        for (Eigen::Index i = 0; i < nr; ++i) diffs.push_back(wrap_unit(rows[i] - cols[k]));
    CVector vals = steer_adjoint_raw(diffs, w, method);
    for (Eigen::Index k = 0; k < nc; ++k)
        for (Eigen::Index i = 0; i < nr; ++i) g(i, k) = vals[static_cast<std::size_t>(k * nr + i)];
    return g;
}

// Hermitian Gram matrix of one frequency set; the diagonal is sum_n w_n.
inline Eigen::MatrixXcd gram_full(std::span<const double> f, std::span<const double> weights,
                                  NufftMethod method = NufftMethod::Auto) {
    const auto k = static_cast<Eigen::Index>(f.size());
    Eigen::MatrixXcd g(k, k);
    if (k == 0) return g;
    double total = 0.0;
    for (double w : weights) total += w;
    CVector w(weights.begin(), weights.end());
    std::vector<double> diffs;
    for (Eigen::Index c = 0; c < k; ++c)
        for (Eigen::Index r = 0; r < c; ++r) diffs.push_back(wrap_unit(f[r] - f[c]));
    CVector vals = steer_adjoint_raw(diffs, w, method);
    std::size_t idx = 0;
    for (Eigen::Index c = 0; c < k; ++c) {
        g(c, c) = cplx(total, 0.0);
        for (Eigen::Index r = 0; r < c; ++r) {
            g(r, c) = vals[idx++];
            g(c, r) = std::conj(g(r, c));
        }
    }
    return g;
}

// Gram matrix with weights given over observed indices.
inline Eigen::MatrixXcd gram(const FrequencySet& rows, const FrequencySet& cols,
                             std::span<const double> weights, std::span<const std::size_t> indices,
                             std::size_t n, NufftMethod method = NufftMethod::Auto) {
    if (weights.size() != indices.size()) throw DimensionMismatch("gram: weights and indices differ in length");
    std::vector<double> full(n, 0.0);
    for (std::size_t m = 0; m < indices.size(); ++m) {
        if (indices[m] >= n) throw InvalidPattern("gram: index out of range");
        full[indices[m]] += weights[m];
    }
    return gram_full(rows.values(), cols.values(), full, method);
}

}  // namespace superlse
