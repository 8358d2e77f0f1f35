#pragma once

// Outer loop: activation, activation-rate update, noise-variance update,
// then L-BFGS refinement of frequencies and variances interleaved with
// deactivation, until the objective stops changing.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "lbfgs.hpp"
#include "model.hpp"
#include "smlr.hpp"

namespace superlse {

struct EstimatorOptions {
    std::size_t grid_factor = 8;              // grid size L = next power of two >= grid_factor * N
    double tau = 5.0;                          // activation margin
    std::size_t max_outer_iterations = 200;
    double convergence_scale = 1e-7;           // stop when |change| < M * convergence_scale
    std::size_t inner_steps = 5;               // L-BFGS steps per outer iteration
    double decrement_scale = 1e-8;             // stop refining when decrement < M * decrement_scale
    std::size_t sweep_iterations = 3;          // outer iterations using the activation sweep
    bool repeat_sweep = false;                 // repeat the sweep within an iteration until no change
    bool sweep_uses_tau = false;               // apply the tau margin to sweep candidates
    std::size_t lbfgs_memory = 10;
    double initial_beta_fraction = 0.01;       // beta_0 = fraction * energy / (G M)
    double initial_zeta = 0.2;
    double beta_floor_scale = 1e-12;           // beta >= scale * energy / (G M)
    Backend backend = Backend::Auto;
    ToeplitzSolver toeplitz = ToeplitzSolver::Auto;
    NufftMethod nufft = NufftMethod::Auto;
    std::uint64_t seed = 0;                    // recorded only; the estimator is deterministic
};

enum class Block { Initial, Activation, Zeta, Beta, Refinement, Deactivation };

inline const char* block_name(Block b) {
    switch (b) {
        case Block::Initial: return "initial";
        case Block::Activation: return "activation";
        case Block::Zeta: return "zeta";
        case Block::Beta: return "beta";
        case Block::Refinement: return "refinement";
        case Block::Deactivation: return "deactivation";
    }
    return "?";
}

struct StageTimes {
    double activation = 0.0, zeta = 0.0, beta = 0.0, refinement = 0.0, deactivation = 0.0;  // seconds
};

struct LseResult {
    std::size_t k_hat = 0;
    std::vector<double> theta;
    std::vector<double> gamma;
    std::vector<CVector> alpha;  // per snapshot, ordered like theta
    double beta = 0.0;
    double zeta = 0.0;
    std::vector<double> objective_trace;
    std::vector<Block> trace_blocks;
    std::vector<std::size_t> trace_active;  // active components after each block
    std::size_t iterations = 0;
    bool converged = false;
    Backend backend = Backend::Auto;
    StageTimes times;
    std::vector<std::string> warnings;
};

inline std::size_t grid_size_for(std::size_t n, std::size_t grid_factor) {
    return std::max(fft::next_pow2(std::max<std::size_t>(grid_factor, 1) * n), fft::next_pow2(2 * n));
}

// zeta = min(1/2, K_hat / K_max)
inline double update_zeta(const EstimationState& s) {
    if (s.k_max == 0) return 0.0;
    return std::min(0.5, static_cast<double>(s.active()) / static_cast<double>(s.k_max));
}

// EM update: beta = max(floor, tr(Sigma A^H A) / M + sum_g ||y_g - A mu_g||^2 / (G M)).
inline double update_beta(const ModelEvaluation& ev, const Observation& obs, double floor,
                          NufftMethod method = NufftMethod::Auto) {
    const auto& s = ev.state();
    const auto m = static_cast<double>(obs.m());
    const auto g = static_cast<double>(obs.snapshot_count());
    const Posterior p = ev.posterior();
    double resid = 0.0;
    for (std::size_t j = 0; j < obs.snapshot_count(); ++j) {
        const auto& y = obs.snapshot(j);
        CVector fit = s.active() ? obs.sample(steer_forward_raw(s.theta, p.mu[j], obs.n(), method)) : CVector(y.size(), cplx(0.0));
        for (std::size_t i = 0; i < y.size(); ++i) resid += std::norm(y[i] - fit[i]);
    }
    return std::max(floor, p.trace_term / m + resid / (g * m));
}

namespace detail {

class EstimatorRun {
public:
    using clock = std::chrono::steady_clock;

    EstimatorRun(const Observation& obs, const EstimatorOptions& opt)
        : obs_(obs), opt_(opt), memory_(opt.lbfgs_memory) {
        model_.backend = resolve_backend(opt.backend, obs);
        model_.toeplitz = opt.toeplitz;
        model_.nufft = opt.nufft;
        act_.tau = opt.tau;
        act_.sweep_uses_tau = opt.sweep_uses_tau;
        const double per_sample = obs.energy() / (static_cast<double>(obs.snapshot_count()) * static_cast<double>(obs.m()));
        beta_floor_ = opt.beta_floor_scale * per_sample;
        grid_ = grid_size_for(obs.n(), opt.grid_factor);
        m_ = static_cast<double>(obs.m());
        state_.k_max = obs.m();
        state_.beta = std::max(beta_floor_, opt.initial_beta_fraction * per_sample);
        state_.zeta = opt.initial_zeta;
    }

    LseResult run() {
        LseResult res;
        res.backend = model_.backend;
        if (!(obs_.energy() > 0.0)) {
            res.converged = true;
            res.alpha.assign(obs_.snapshot_count(), CVector{});
            res.warnings.push_back("data are identically zero; nothing to estimate");
            return res;
        }
        reevaluate();
        record(res, Block::Initial);
        bool set_changed = true;
        for (std::size_t it = 0; it < opt_.max_outer_iterations; ++it) {
            res.iterations = it + 1;
            const double start = value();

            auto t0 = clock::now();
            if (activate(res, it < opt_.sweep_iterations)) set_changed = true;
            res.times.activation += seconds_since(t0);

            t0 = clock::now();
            state_.zeta = update_zeta(state_);
            record(res, Block::Zeta);
            res.times.zeta += seconds_since(t0);

            t0 = clock::now();
            state_.beta = update_beta(*ev_, obs_, beta_floor_, model_.nufft);
            reevaluate();
            record(res, Block::Beta);
            res.times.beta += seconds_since(t0);

            refine(res, set_changed);
            set_changed = false;

            if (std::abs(start - value()) < m_ * opt_.convergence_scale) {
                res.converged = true;
                break;
            }
        }
        if (!res.converged) res.warnings.push_back("maximum number of outer iterations reached");
        finish(res);
        return res;
    }

private:
    static double seconds_since(clock::time_point t0) {
        return std::chrono::duration<double>(clock::now() - t0).count();
    }

    double value() const { return ev_->data_term() + prior_penalty(state_); }

    void reevaluate() { ev_ = std::make_unique<ModelEvaluation>(state_, obs_, model_); }

    void record(LseResult& res, Block b) const {
        res.objective_trace.push_back(value());
        res.trace_blocks.push_back(b);
        res.trace_active.push_back(state_.active());
    }

    // Repeated until nothing changes, at most K_max times.
    bool activate(LseResult& res, bool sweep) {
        bool changed = false;
        std::size_t rounds = 0;
        for (; rounds < state_.k_max; ++rounds) {
            if (state_.active() >= state_.k_max) break;
            const GridStats grid = ev_->grid_stats(grid_);
            if (sweep) {
                auto cands = propose_sweep(state_, obs_, grid, act_);
                if (cands.empty()) break;
                EstimationState trial = state_;
                for (const auto& c : cands) trial.add(c.theta, c.gamma);
                auto ev = std::make_unique<ModelEvaluation>(trial, obs_, model_);
                if (ev->data_term() + prior_penalty(trial) < value()) {
                    state_ = std::move(trial);
                    ev_ = std::move(ev);
                    record(res, Block::Activation);
                    changed = true;
                    if (!opt_.repeat_sweep) break;
                    continue;
                }
                // Joint activation did not pay off; continue one at a time.
                sweep = false;
            }
            if (!try_activate(state_, obs_, grid, act_)) break;
            reevaluate();
            record(res, Block::Activation);
            changed = true;
        }
        if (rounds == state_.k_max) res.warnings.push_back("activation loop reached K_max repetitions");
        return changed;
    }

    // Deactivates until no removal lowers the objective; returns whether any happened.
    bool deactivate(LseResult& res) {
        bool changed = false;
        const std::size_t cap = state_.k_max;
        for (std::size_t rounds = 0; rounds < cap && state_.active() > 0; ++rounds) {
            if (!try_deactivate(state_, ev_->stats())) break;
            reevaluate();
            record(res, Block::Deactivation);
            changed = true;
        }
        return changed;
    }

    void reset_memory() {
        if (state_.active() == 0) return;
        const auto h = diag_hessian(state_, ev_->stats(), obs_.n());
        std::vector<double> d(h.theta);
        d.insert(d.end(), h.gamma.begin(), h.gamma.end());
        memory_.reset(std::move(d));
    }

    void refine(LseResult& res, bool set_changed) {
        auto t0 = clock::now();
        if (set_changed || memory_.dimension() != 2 * state_.active()) reset_memory();
        const double tol = m_ * opt_.decrement_scale;
        for (std::size_t step = 0; step < opt_.inner_steps && state_.active() > 0; ++step) {
            const std::size_t k = state_.active();
            std::vector<double> x(state_.theta);
            x.insert(x.end(), state_.gamma.begin(), state_.gamma.end());
            const Gradient g = gradient(state_, ev_->stats());
            std::vector<double> gv(g.theta);
            gv.insert(gv.end(), g.gamma.begin(), g.gamma.end());
            LbfgsLayout layout;
            layout.periodic.assign(2 * k, false);
            layout.nonnegative.assign(2 * k, false);
            for (std::size_t i = 0; i < k; ++i) {
                layout.periodic[i] = true;
                layout.nonnegative[k + i] = true;
            }

            std::unique_ptr<ModelEvaluation> last;
            auto to_state = [&](const std::vector<double>& p) {
                EstimationState s = state_;
                s.theta.assign(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(k));
                s.gamma.assign(p.begin() + static_cast<std::ptrdiff_t>(k), p.end());
                return s;
            };
            auto f = [&](const std::vector<double>& p) -> std::optional<double> {
                try {
                    EstimationState s = to_state(p);
                    last = std::make_unique<ModelEvaluation>(s, obs_, model_);
                    return last->data_term() + prior_penalty(s);
                } catch (const NumericalError&) {
                    last.reset();
                    return std::nullopt;
                }
            };
            auto grad = [&](const std::vector<double>&) {
                const Gradient gr = gradient(last->state(), last->stats());
                std::vector<double> out(gr.theta);
                out.insert(out.end(), gr.gamma.begin(), gr.gamma.end());
                return out;
            };
            LbfgsOptions lo;
            lo.memory = opt_.lbfgs_memory;
            const LbfgsStep r = lbfgs_step(memory_, x, value(), gv, f, grad, layout, tol, lo);
            if (r.status != LbfgsStatus::Accepted) break;
            state_ = last->state();
            ev_ = std::move(last);
            record(res, Block::Refinement);

            auto t1 = clock::now();
            const bool removed = deactivate(res);
            res.times.deactivation += seconds_since(t1);
            if (removed) reset_memory();
        }
        res.times.refinement += seconds_since(t0);
    }

    void finish(LseResult& res) {
        std::vector<std::size_t> order(state_.active());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return state_.theta[a] < state_.theta[b]; });
        const Posterior p = ev_->posterior();
        res.k_hat = state_.active();
        res.alpha.assign(obs_.snapshot_count(), CVector{});
        for (std::size_t i : order) {
            res.theta.push_back(state_.theta[i]);
            res.gamma.push_back(state_.gamma[i]);
            for (std::size_t g = 0; g < obs_.snapshot_count(); ++g) res.alpha[g].push_back(p.mu[g][i]);
        }
        res.beta = state_.beta;
        res.zeta = state_.zeta;
    }

    const Observation& obs_;
    EstimatorOptions opt_;
    ModelOptions model_;
    ActivationOptions act_;
    LbfgsMemory memory_;
    EstimationState state_;
    std::unique_ptr<ModelEvaluation> ev_;
    double beta_floor_ = 0.0;
    std::size_t grid_ = 0;
    double m_ = 0.0;
};

}  // namespace detail

inline LseResult estimate(const Observation& obs, const EstimatorOptions& opt = {}) {
    return detail::EstimatorRun(obs, opt).run();
}

// Multiple snapshots sharing frequencies; with one snapshot this is estimate().
inline LseResult estimate_mmv(const Observation& obs, const EstimatorOptions& opt = {}) {
    return estimate(obs, opt);
}

}  // namespace superlse
