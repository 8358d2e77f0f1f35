#pragma once

// Synthetic line spectra, sampling patterns and recovery metrics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "model.hpp"
#include "nufft.hpp"
#include "smlr.hpp"

namespace superlse {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Independent stream for (base, a, b), e.g. (seed, sweep point, trial).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(splitmix64(base) ^ a) ^ (b * 0xD6E8FEB86659FD93ull));
}

// mt19937_64 with distributions defined here, so draws are identical on
// every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // Uniform on (0, 1).
    double uniform() { return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return std::min(static_cast<std::size_t>(uniform() * static_cast<double>(n)), n - 1);
    }

    double normal() {
        if (spare_) {
            const double v = *spare_;
            spare_.reset();
            return v;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double a = kTwoPi * uniform();
        spare_ = r * std::sin(a);
        return r * std::cos(a);
    }

    // Circular complex normal with E|x|^2 = variance.
    cplx complex_normal(double variance) {
        const double sd = std::sqrt(variance / 2.0);
        const double re = normal();
        return cplx(sd * re, sd * normal());
    }

private:
    std::mt19937_64 eng_;
    std::optional<double> spare_;
};

// Sample uniformly from [0, 1) minus the open arcs of the given radius
// around each centre.
inline double sample_outside(const std::vector<double>& centres, double radius, Rng& rng) {
    std::vector<std::pair<double, double>> blocked;
    for (double c : centres) {
        double lo = c - radius, hi = c + radius;
        if (hi - lo >= 1.0) return std::numeric_limits<double>::quiet_NaN();
        lo -= std::floor(lo);
        hi = lo + 2.0 * radius;
        if (hi > 1.0) {
            blocked.emplace_back(lo, 1.0);
            blocked.emplace_back(0.0, hi - 1.0);
        } else {
            blocked.emplace_back(lo, hi);
        }
    }
    std::sort(blocked.begin(), blocked.end());
    std::vector<std::pair<double, double>> free;
    double cur = 0.0;
    for (const auto& [lo, hi] : blocked) {
        if (lo > cur) free.emplace_back(cur, lo);
        cur = std::max(cur, hi);
    }
    if (cur < 1.0) free.emplace_back(cur, 1.0);
    double total = 0.0;
    for (const auto& [lo, hi] : free) total += hi - lo;
    if (!(total > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    double u = rng.uniform() * total;
    for (const auto& [lo, hi] : free) {
        if (u < hi - lo) return wrap_unit(lo + u);
        u -= hi - lo;
    }
    return wrap_unit(free.back().second - 1e-16);
}

// Frequencies drawn one after another, each uniform on the set of points
// further than min_sep from all previous ones.
inline std::vector<double> sample_frequencies(std::size_t k, double min_sep, Rng& rng) {
    std::vector<double> out;
    for (std::size_t i = 0; i < k; ++i) {
        const double th = sample_outside(out, min_sep, rng);
        if (std::isnan(th)) throw InfeasibleSeparation("cannot place " + std::to_string(k) + " frequencies with separation " + std::to_string(min_sep));
        out.push_back(th);
    }
    return out;
}

// k / 2 pairs with intra-pair separation delta; distinct pairs are at least
// min_sep apart.  An odd k adds one isolated frequency.
inline std::vector<double> sample_frequency_pairs(std::size_t k, double delta, double min_sep, Rng& rng) {
    std::vector<double> anchors, out;
    const std::size_t pairs = k / 2;
    for (std::size_t i = 0; i < pairs + (k % 2); ++i) {
        const bool single = i == pairs;
        // Anchor arcs [a, a + delta]; shift centres so the exclusion is symmetric.
        std::vector<double> centres;
        for (double a : anchors) centres.push_back(a + 0.5 * delta);
        const double half = single ? 0.5 * delta : delta;
        const double c = sample_outside(centres, half + min_sep, rng);
        if (std::isnan(c)) throw InfeasibleSeparation("cannot place frequency pairs");
        const double a = wrap_unit(c - 0.5 * (single ? 0.0 : delta));
        anchors.push_back(a);
        out.push_back(a);
        if (!single) out.push_back(wrap_unit(a + delta));
    }
    return out;
}

// alpha = a + 0.2 exp(j arg a) with a circular complex normal of standard
// deviation 0.8, so |alpha| >= 0.2.
inline cplx sample_amplitude(Rng& rng) {
    const cplx a = rng.complex_normal(0.64);
    return a + 0.2 * std::polar(1.0, std::arg(a));
}

// M indices out of N including 0 and N - 1, the rest uniform without replacement.
inline std::vector<std::size_t> sample_pattern(std::size_t n, std::size_t m, Rng& rng) {
    if (m > n || m < std::min<std::size_t>(n, 2)) throw InvalidPattern("need min(2, N) <= M <= N");
    if (m == n) {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        return all;
    }
    std::vector<std::size_t> inner;
    for (std::size_t i = 1; i + 1 < n; ++i) inner.push_back(i);
    for (std::size_t i = 0; i < m - 2; ++i) std::swap(inner[i], inner[i + rng.index(inner.size() - i)]);
    std::vector<std::size_t> out(inner.begin(), inner.begin() + static_cast<std::ptrdiff_t>(m - 2));
    out.push_back(0);
    out.push_back(n - 1);
    std::sort(out.begin(), out.end());
    return out;
}

struct SignalSpec {
    std::size_t n = 128;
    std::size_t m = 0;               // 0 means M = N (complete data)
    std::size_t k = 10;
    double snr_db = 20.0;
    double min_separation = -1.0;    // negative means 2 / N
    std::size_t snapshots = 1;
    double pair_separation = -1.0;   // positive: generate k / 2 close pairs
};

struct GroundTruth {
    std::size_t n = 0;
    std::vector<double> theta;
    std::vector<CVector> alpha;  // per snapshot
    double beta = 0.0;
    double snr_db = 0.0;
};

struct SyntheticSignal {
    Observation obs;
    GroundTruth truth;
};

inline SyntheticSignal generate(const SignalSpec& spec, Rng& rng) {
    const std::size_t n = spec.n;
    if (n == 0) throw DimensionMismatch("N must be positive");
    if (spec.snapshots == 0) throw DimensionMismatch("need at least one snapshot");
    const std::size_t m = spec.m == 0 ? n : spec.m;
    const double min_sep = spec.min_separation < 0.0 ? 2.0 / static_cast<double>(n) : spec.min_separation;
    GroundTruth truth;
    truth.n = n;
    truth.snr_db = spec.snr_db;
    truth.theta = spec.pair_separation > 0.0 ? sample_frequency_pairs(spec.k, spec.pair_separation, min_sep, rng)
                                             : sample_frequencies(spec.k, min_sep, rng);
    const auto pattern = sample_pattern(n, m, rng);
    std::vector<CVector> clean;
    double power = 0.0;
    for (std::size_t g = 0; g < spec.snapshots; ++g) {
        CVector a(spec.k);
        for (auto& v : a) v = sample_amplitude(rng);
        CVector x = steer_forward_raw(truth.theta, a, n);
        CVector y(m);
        for (std::size_t i = 0; i < m; ++i) {
            y[i] = x[pattern[i]];
            power += std::norm(y[i]);
        }
        truth.alpha.push_back(std::move(a));
        clean.push_back(std::move(y));
    }
    truth.beta = power / (static_cast<double>(spec.snapshots) * static_cast<double>(m) * std::pow(10.0, spec.snr_db / 10.0));
    for (auto& y : clean)
        for (auto& v : y) v += rng.complex_normal(truth.beta);
    Observation obs = m == n ? Observation::complete(std::move(clean))
                             : Observation::incomplete(n, pattern, CVector(m, cplx(1.0)), std::move(clean));
    return {std::move(obs), std::move(truth)};
}

// Minimum-cost assignment (Hungarian method) for an r x c cost matrix with
// r <= c; returns the column assigned to each row.
inline std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
    const std::size_t r = cost.size();
    if (r == 0) return {};
    const std::size_t c = cost.front().size();
    if (c < r) throw DimensionMismatch("hungarian: need rows <= columns");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(r + 1, 0.0), v(c + 1, 0.0);
    std::vector<std::size_t> p(c + 1, 0), way(c + 1, 0);
    for (std::size_t i = 1; i <= r; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(c + 1, inf);
        std::vector<bool> used(c + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= c; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= c; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> out(r);
    for (std::size_t j = 1; j <= c; ++j)
        if (p[j] != 0) out[p[j] - 1] = j - 1;
    return out;
}

// Pairs (truth index, estimate index) minimising the summed squared
// wrap-around distance; min(K, K_hat) pairs.
inline std::vector<std::pair<std::size_t, std::size_t>> match_frequencies(const std::vector<double>& truth,
                                                                          const std::vector<double>& est) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (truth.empty() || est.empty()) return out;
    const bool flip = truth.size() > est.size();
    const auto& rows = flip ? est : truth;
    const auto& cols = flip ? truth : est;
    std::vector<std::vector<double>> cost(rows.size(), std::vector<double>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) cost[i][j] = std::pow(wrap_distance(rows[i], cols[j]), 2);
    const auto a = hungarian(cost);
    for (std::size_t i = 0; i < rows.size(); ++i) out.emplace_back(flip ? a[i] : i, flip ? i : a[i]);
    std::sort(out.begin(), out.end());
    return out;
}

// Block success: K_hat == K and every matched frequency within 0.5 / N.
inline bool block_success(const std::vector<double>& truth, const std::vector<double>& est, std::size_t n) {
    if (truth.size() != est.size()) return false;
    const double tol = 0.5 / static_cast<double>(n);
    for (const auto& [i, j] : match_frequencies(truth, est))
        if (!(wrap_distance(truth[i], est[j]) < tol)) return false;
    return true;
}

// Fraction of true and estimated frequencies with a counterpart within 0.5 / N.
inline double component_success(const std::vector<double>& truth, const std::vector<double>& est, std::size_t n) {
    if (truth.empty() && est.empty()) return 1.0;
    const double tol = 0.5 / static_cast<double>(n);
    auto hits = [&](const std::vector<double>& from, const std::vector<double>& to) {
        std::size_t c = 0;
        for (double a : from)
            for (double b : to)
                if (wrap_distance(a, b) < tol) {
                    ++c;
                    break;
                }
        return c;
    };
    return static_cast<double>(hits(est, truth) + hits(truth, est)) / static_cast<double>(truth.size() + est.size());
}

// ||x_hat - x||^2 / ||x||^2 over all snapshots with x = Psi alpha of length N.
inline double nmse(const GroundTruth& truth, const std::vector<double>& theta, const std::vector<CVector>& alpha) {
    double num = 0.0, den = 0.0;
    for (std::size_t g = 0; g < truth.alpha.size(); ++g) {
        CVector x = steer_forward_raw(truth.theta, truth.alpha[g], truth.n);
        CVector xh = theta.empty() ? CVector(truth.n, cplx(0.0)) : steer_forward_raw(theta, alpha.at(g), truth.n);
        for (std::size_t i = 0; i < truth.n; ++i) {
            num += std::norm(xh[i] - x[i]);
            den += std::norm(x[i]);
        }
    }
    return num / den;
}

// NMSE of least squares amplitudes at the true frequencies.
inline double oracle_nmse(const SyntheticSignal& sig) {
    const auto& obs = sig.obs;
    const auto m = static_cast<Eigen::Index>(obs.m());
    const auto k = static_cast<Eigen::Index>(sig.truth.theta.size());
    Eigen::MatrixXcd a(m, k);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < k; ++j)
            a(i, j) = obs.scales()[static_cast<std::size_t>(i)] *
                      std::polar(1.0, kTwoPi * static_cast<double>(obs.indices()[static_cast<std::size_t>(i)]) *
                                          sig.truth.theta[static_cast<std::size_t>(j)]);
    auto qr = a.colPivHouseholderQr();
    std::vector<CVector> alpha;
    for (const auto& y : obs.snapshots()) {
        Eigen::VectorXcd sol = qr.solve(Eigen::Map<const Eigen::VectorXcd>(y.data(), m));
        alpha.emplace_back(sol.data(), sol.data() + k);
    }
    return nmse(sig.truth, sig.truth.theta, alpha);
}

}  // namespace superlse
