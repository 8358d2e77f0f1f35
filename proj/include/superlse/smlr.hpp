#pragma once

// Single most likely replacement: decisions to activate a component on the
// frequency grid or to deactivate an existing one.  Every accepted decision
// lowers the objective for the current noise variance and activation rate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "model.hpp"

namespace superlse {

struct ActivationOptions {
    double tau = 5.0;                                        // extra SNR margin in the activation test
    double eps = std::numeric_limits<double>::epsilon();     // minimum objective decrease
    double k_init = 4.0;                                     // gamma_bar = energy / (G M k_init) when empty
    double sweep_fraction = 0.2;                             // sweep keeps minima within this fraction of the best
    double sweep_min_distance = 0.05;                        // in units of 1 / N
    bool sweep_uses_tau = false;
};

struct ActivationCandidate {
    std::size_t grid_index = 0;
    double theta = 0.0;
    double gamma = 0.0;
    double delta = 0.0;  // objective change at gamma_bar
};

// Mean variance of the active components, or a default from the data energy.
inline double reference_gamma(const EstimationState& s, const Observation& obs, const ActivationOptions& opt = {}) {
    if (s.active() == 0)
        return obs.energy() /
               (static_cast<double>(obs.snapshot_count()) * static_cast<double>(obs.m()) * opt.k_init);
    double acc = 0.0;
    for (double g : s.gamma) acc += g;
    return acc / static_cast<double>(s.active());
}

// Objective change from adding a component with variance gamma, given its
// s and the snapshot sum Q = sum_g |q_g|^2 under the current covariance.
inline double activation_change(double s, double q2, double gamma, double zeta, double g) {
    return g * std::log1p(gamma * s) + std::log((1.0 - zeta) / zeta) - q2 * gamma / (1.0 + gamma * s);
}

// Variance minimising activation_change: (Q / G - s) / s^2.
inline double optimal_gamma(double s, double q2, double g) { return (q2 / g - s) / (s * s); }

// SNR-type test: Q / (G s) must exceed the break-even value by tau.
inline bool passes_activation_test(double s, double q2, double gamma_bar, double zeta, double g, double tau) {
    const double kappa = q2 / (g * s);
    const double bound = (1.0 + 1.0 / (gamma_bar * s)) * (std::log1p(gamma_bar * s) + std::log((1.0 - zeta) / zeta) / g);
    return kappa > bound + tau;
}

namespace detail {

inline std::vector<double> grid_q2(const GridStats& grid) {
    std::vector<double> q2(grid.grid_size, 0.0);
    for (const auto& q : grid.q)
        for (std::size_t l = 0; l < grid.grid_size; ++l) q2[l] += std::norm(q[l]);
    return q2;
}

inline std::vector<double> grid_changes(const GridStats& grid, const std::vector<double>& q2, double gamma_bar,
                                        double zeta) {
    const auto g = static_cast<double>(grid.q.size());
    std::vector<double> dl(grid.grid_size);
    for (std::size_t l = 0; l < grid.grid_size; ++l) {
        const double s = grid.s[l];
        dl[l] = s > 0.0 ? activation_change(s, q2[l], gamma_bar, zeta, g) : std::numeric_limits<double>::infinity();
    }
    return dl;
}

}  // namespace detail

// Best single activation on the grid (lowest index wins ties), if it passes
// the activation test, has a positive optimal variance and lowers the
// objective by more than eps.
inline std::optional<ActivationCandidate> propose_activation(const EstimationState& s, const Observation& obs,
                                                             const GridStats& grid, const ActivationOptions& opt = {}) {
    if (s.active() >= s.k_max) return std::nullopt;
    const double gamma_bar = reference_gamma(s, obs, opt);
    const double zeta = effective_zeta(s);
    const auto g = static_cast<double>(grid.q.size());
    const auto q2 = detail::grid_q2(grid);
    const auto dl = detail::grid_changes(grid, q2, gamma_bar, zeta);
    std::size_t best = 0;
    for (std::size_t l = 1; l < dl.size(); ++l)
        if (dl[l] < dl[best]) best = l;
    const double sb = grid.s[best];
    if (!(sb > 0.0) || !(dl[best] < -opt.eps)) return std::nullopt;
    if (!passes_activation_test(sb, q2[best], gamma_bar, zeta, g, opt.tau)) return std::nullopt;
    const double gh = optimal_gamma(sb, q2[best], g);
    if (!(gh > 0.0)) return std::nullopt;
    return ActivationCandidate{best, static_cast<double>(best) / static_cast<double>(grid.grid_size), gh, dl[best]};
}

inline double wrap_distance(double a, double b) {
    double d = std::abs(a - b);
    d -= std::floor(d);
    return std::min(d, 1.0 - d);
}

// Simultaneous activation of all local minima of the objective change that
// lower the objective, have a positive optimal variance, reach the given
// fraction of the best decrease and keep a minimum distance to active
// components.  Candidates are returned in order of decreasing benefit.
inline std::vector<ActivationCandidate> propose_sweep(const EstimationState& s, const Observation& obs,
                                                      const GridStats& grid, const ActivationOptions& opt = {}) {
    std::vector<ActivationCandidate> out;
    if (s.active() >= s.k_max) return out;
    const double gamma_bar = reference_gamma(s, obs, opt);
    const double zeta = effective_zeta(s);
    const auto g = static_cast<double>(grid.q.size());
    const std::size_t len = grid.grid_size;
    const auto q2 = detail::grid_q2(grid);
    const auto dl = detail::grid_changes(grid, q2, gamma_bar, zeta);

    std::vector<std::size_t> minima;
    double best = 0.0;
    for (std::size_t l = 0; l < len; ++l) {
        const double prev = dl[(l + len - 1) % len], next = dl[(l + 1) % len];
        if (dl[l] <= prev && dl[l] <= next && dl[l] < -opt.eps) {
            minima.push_back(l);
            best = std::min(best, dl[l]);
        }
    }
    std::stable_sort(minima.begin(), minima.end(), [&](std::size_t a, std::size_t b) { return dl[a] < dl[b]; });
    const double min_dist = opt.sweep_min_distance / static_cast<double>(obs.n());
    std::vector<double> taken(s.theta.begin(), s.theta.end());
    for (std::size_t l : minima) {
        if (s.active() + out.size() >= s.k_max) break;
        if (!(dl[l] <= opt.sweep_fraction * best)) continue;
        const double gh = optimal_gamma(grid.s[l], q2[l], g);
        if (!(gh > 0.0)) continue;
        if (opt.sweep_uses_tau && !passes_activation_test(grid.s[l], q2[l], gamma_bar, zeta, g, opt.tau)) continue;
        const double th = static_cast<double>(l) / static_cast<double>(len);
        bool far = true;
        for (double t : taken) far = far && wrap_distance(t, th) >= min_dist;
        if (!far) continue;
        taken.push_back(th);
        out.push_back({l, th, gh, dl[l]});
    }
    return out;
}

inline bool try_activate(EstimationState& s, const Observation& obs, const GridStats& grid,
                         const ActivationOptions& opt = {}) {
    auto c = propose_activation(s, obs, grid, opt);
    if (!c) return false;
    s.add(c->theta, c->gamma);
    return true;
}

// Objective change L(z_k = 1) - L(z_k = 0) for every active component; a
// positive value means removing it lowers the objective.
inline std::vector<double> deactivation_gains(const EstimationState& s, const ComponentStats& st) {
    const double zeta = effective_zeta(s);
    const auto g = static_cast<double>(st.snapshot_count());
    std::vector<double> out(s.active());
    for (std::size_t k = 0; k < s.active(); ++k) {
        const double gm = s.gamma[k];
        const double sk = st.s[k].real();
        const double denom = 1.0 - gm * sk;
        if (!(gm > 0.0)) {
            out[k] = std::numeric_limits<double>::infinity();
            continue;
        }
        if (!(denom > 0.0)) {
            out[k] = -std::numeric_limits<double>::infinity();
            continue;
        }
        const double s_t = sk / denom;
        double q2 = 0.0;
        for (std::size_t j = 0; j < st.snapshot_count(); ++j) q2 += std::norm(st.q[j][k] / denom);
        out[k] = g * std::log1p(gm * s_t) - q2 / (1.0 / gm + s_t) + std::log((1.0 - zeta) / zeta);
    }
    return out;
}

// Index of the component whose removal lowers the objective most, if any.
inline std::optional<std::size_t> propose_deactivation(const EstimationState& s, const ComponentStats& st) {
    const auto gains = deactivation_gains(s, st);
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < gains.size(); ++k)
        if (gains[k] > 0.0 && (!best || gains[k] > gains[*best])) best = k;
    return best;
}

inline std::optional<std::size_t> try_deactivate(EstimationState& s, const ComponentStats& st) {
    auto k = propose_deactivation(s, st);
    if (k) s.remove(*k);
    return k;
}

}  // namespace superlse
