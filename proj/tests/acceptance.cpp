// Acceptance checks.  Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.  Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <superlse/estimator.hpp>
#include <superlse/simdata.hpp>

#include "dense_oracle.hpp"

using namespace superlse;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double db(double x) { return 10.0 * std::log10(x); }

SyntheticSignal make(const SignalSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    return generate(spec, rng);
}

double rel(const CVector& a, const CVector& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::norm(a[i] - b[i]);
        den += std::norm(b[i]);
    }
    return std::sqrt(num / std::max(den, 1e-300));
}

// Random positive definite Toeplitz column: either a sum of sinusoids plus
// noise, or the autocorrelation of a random filter plus a small ridge.
CVector random_toeplitz(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < 0.5) return oracle::random_pd_column(n, rng);
    std::normal_distribution<double> g;
    const std::size_t len = 1 + static_cast<std::size_t>(u(rng) * 2 * static_cast<double>(n));
    CVector h(len);
    for (auto& v : h) v = cplx(g(rng), g(rng));
    CVector c(n, cplx(0.0));
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t i = 0; i + m < len; ++i) c[m] += h[i + m] * std::conj(h[i]);
    c[0] = cplx(c[0].real() * (1.0 + 0.01 + 0.1 * u(rng)), 0.0);
    return c;
}

// 1. GS parameters, inverse application, log-determinant and diagonal sums
//    against dense computations, for both decomposition routes.
Outcome oracle_equivalence() {
    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<std::size_t> size(2, 64);
    std::normal_distribution<double> g;
    double worst = 0.0;
    const char* where = "";
    for (int inst = 0; inst < 200; ++inst) {
        const std::size_t n = size(rng);
        HermitianToeplitz t(random_toeplitz(n, rng));
        const oracle::Mat c = oracle::toeplitz(t);
        const oracle::Mat ci = c.inverse();
        const auto last = static_cast<Eigen::Index>(n - 1);
        const oracle::Vec rho = ci.col(last) / ci(last, last);
        const double delta = 1.0 / ci(last, last).real();
        const double ld = 2.0 * c.llt().matrixL().toDenseMatrix().diagonal().array().real().log().sum();
        oracle::Vec x(static_cast<Eigen::Index>(n));
        for (auto& v : x) v = cplx(g(rng), g(rng));
        const oracle::Vec sol = c.llt().solve(x);
        const oracle::Mat dm = oracle::d_matrix(n);
        const std::array<oracle::Mat, 4> w = {ci, dm * ci, dm * dm * ci, dm * ci * dm};

        for (auto route : {ToeplitzSolver::Levinson, ToeplitzSolver::Schur}) {
            const GSDecomposition d = route == ToeplitzSolver::Levinson ? levinson_durbin(t) : generalized_schur(t, 8);
            auto note = [&](double e, const char* what) {
                if (e > worst) {
                    worst = e;
                    where = what;
                }
            };
            note(oracle::rel_err(oracle::to_eigen(d.rho), rho), "rho");
            note(std::abs(d.delta.back() - delta) / delta, "delta");
            // Inverse rebuilt from the GS parameters.
            const auto nn = static_cast<Eigen::Index>(n);
            oracle::Mat t0 = oracle::Mat::Zero(nn, nn), t1 = oracle::Mat::Zero(nn, nn);
            for (Eigen::Index i = 0; i < nn; ++i)
                for (Eigen::Index k = 0; k < nn; ++k) {
                    if (i - k - 1 >= 0) t0(i, k) = d.rho[static_cast<std::size_t>(i - k - 1)];
                    if (i - k <= 0) t1(i, k) = d.rho[static_cast<std::size_t>(nn - 1 + i - k)];
                }
            const oracle::Mat rebuilt = (t1.adjoint() * t1 - t0 * t0.adjoint()) / d.delta.back();
            note((rebuilt - ci).norm() / ci.norm(), "gs reconstruction");
            note(oracle::rel_err(oracle::to_eigen(apply_inverse(d, oracle::from_eigen(x))), sol), "apply_inverse");
            note(std::abs(log_det(d) - ld) / std::max(1.0, std::abs(ld)), "log_det");
            const auto all = all_diagonal_sums(d);
            for (int k = 0; k < 4; ++k) {
                const auto ref = oracle::brute_diagonal_sums(w[static_cast<std::size_t>(k)]);
                note(rel(all[static_cast<std::size_t>(k)].values, ref), "diagonal sums");
                note(rel(diagonal_sums(d, static_cast<DiagonalKind>(k)).values, ref), "diagonal sums");
            }
        }
    }
    return {worst < 1e-8, fmt("200 instances, N <= 64, both routes; worst relative error %.2e (%s), tolerance 1e-8", worst, where)};
}

// 2. Gradient and diagonal Hessian against finite differences of the dense
//    objective.
Outcome derivative_checks() {
    std::mt19937_64 rng(2002);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;
    double worst_g = 0.0, worst_h = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 8 + static_cast<std::size_t>(u(rng) * 25);
        const std::size_t k = 1 + static_cast<std::size_t>(u(rng) * 4);
        const std::size_t snaps = 1 + static_cast<std::size_t>(trial % 3);
        const bool complete = trial % 2 == 0;
        EstimationState s;
        s.k_max = n;
        s.beta = 0.1 + u(rng);
        s.zeta = 0.1 + 0.3 * u(rng);
        while (s.active() < k) {
            const double th = u(rng);
            bool ok = true;
            for (double t : s.theta) ok = ok && wrap_distance(t, th) > 1.0 / static_cast<double>(n);
            if (ok) s.add(th, 0.3 + 2.0 * u(rng));
        }
        std::vector<std::size_t> idx;
        CVector scales;
        for (std::size_t i = 0; i < n; ++i)
            if (complete || i == 0 || i == n - 1 || u(rng) < 0.75) {
                idx.push_back(i);
                scales.push_back(complete ? cplx(1.0) : std::polar(0.5 + u(rng), kTwoPi * u(rng)));
            }
        std::vector<CVector> ys(snaps, CVector(idx.size()));
        for (auto& y : ys)
            for (auto& v : y) v = 2.0 * cplx(g(rng), g(rng));
        const Observation obs = complete ? Observation::complete(ys) : Observation::incomplete(n, idx, scales, ys);

        const ComponentStats st = component_stats(s, obs);
        const Gradient grad = gradient(s, st);
        const Gradient hess = diag_hessian_raw(s, st);
        for (std::size_t i = 0; i < k; ++i) {
            auto f = [&](double dth, double dg) {
                EstimationState p = s;
                p.theta[i] = wrap_unit(p.theta[i] + dth);
                p.gamma[i] += dg;
                return oracle::DenseModel(p, obs).objective(p, obs);
            };
            // Fourth-order central differences.
            auto d1 = [&](const std::function<double(double)>& h, double e) {
                return (-h(2 * e) + 8 * h(e) - 8 * h(-e) + h(-2 * e)) / (12 * e);
            };
            auto d2 = [&](const std::function<double(double)>& h, double e) {
                return (-h(2 * e) + 16 * h(e) - 30 * h(0) + 16 * h(-e) - h(-2 * e)) / (12 * e * e);
            };
            auto fth = [&](double e) { return f(e, 0.0); };
            auto fgm = [&](double e) { return f(0.0, e); };
            const double gam = s.gamma[i];
            const double fd_gt = d1(fth, 1e-5), fd_gg = d1(fgm, 1e-4 * gam);
            const double fd_ht = d2(fth, 2e-4), fd_hg = d2(fgm, 2e-3 * gam);
            auto r = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
            worst_g = std::max({worst_g, r(grad.theta[i], fd_gt), r(grad.gamma[i], fd_gg)});
            worst_h = std::max({worst_h, r(hess.theta[i], fd_ht), r(hess.gamma[i], fd_hg)});
        }
    }
    return {worst_g < 1e-5 && worst_h < 1e-4,
            fmt("50 states, N <= 32, K <= 4; worst relative error gradient %.2e (tol 1e-5), Hessian %.2e (tol 1e-4)",
                worst_g, worst_h)};
}

// 3. Every recorded block update is non-increasing within 1e-9 M.
Outcome monotone_objective() {
    SignalSpec spec;
    spec.n = 64;
    spec.k = 5;
    spec.snr_db = 15.0;
    double worst = -1e300;
    std::size_t updates = 0;
    for (std::uint64_t t = 0; t < 50; ++t) {
        const auto sig = make(spec, derive_seed(3003, 0, t));
        const LseResult r = estimate(sig.obs);
        for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
            worst = std::max(worst, r.objective_trace[i] - r.objective_trace[i - 1]);
            ++updates;
        }
    }
    return {worst <= 1e-9 * 64.0,
            fmt("50 runs, %zu block updates; largest increase %.3g (allowed %.3g)", updates, worst, 1e-9 * 64.0)};
}

// 4. Superfast and semifast backends on complete data.
Outcome backend_agreement() {
    std::size_t same = 0;
    double worst = 0.0;
    for (std::uint64_t t = 0; t < 30; ++t) {
        SignalSpec spec;
        spec.n = t % 2 ? 128 : 64;
        spec.k = t % 2 ? 10 : 5;
        spec.snr_db = t % 2 ? 20.0 : 15.0;
        const auto sig = make(spec, derive_seed(4004, 0, t));
        EstimatorOptions a, b;
        a.backend = Backend::Superfast;
        b.backend = Backend::Semifast;
        const LseResult ra = estimate(sig.obs, a), rb = estimate(sig.obs, b);
        if (ra.k_hat != rb.k_hat) continue;
        ++same;
        for (std::size_t k = 0; k < ra.k_hat; ++k) worst = std::max(worst, wrap_distance(ra.theta[k], rb.theta[k]));
    }
    return {same == 30 && worst < 1e-6, fmt("30 runs; identical k_hat in %zu, max frequency difference %.2e (tol 1e-6)", same, worst)};
}

struct Rates {
    double bsr = 0.0, csr = 0.0, nmse = 0.0, oracle = 0.0;
};

Rates monte_carlo(const SignalSpec& spec, std::size_t trials, std::uint64_t base, const EstimatorOptions& opt,
                  bool with_oracle = false) {
    Rates out;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto sig = make(spec, derive_seed(base, 0, t));
        const LseResult r = estimate(sig.obs, opt);
        out.bsr += block_success(sig.truth.theta, r.theta, spec.n);
        out.csr += component_success(sig.truth.theta, r.theta, spec.n);
        out.nmse += nmse(sig.truth, r.theta, r.alpha);
        if (with_oracle) out.oracle += oracle_nmse(sig);
    }
    const auto d = static_cast<double>(trials);
    out.bsr /= d;
    out.csr /= d;
    out.nmse /= d;
    out.oracle /= d;
    return out;
}

// 5. Complete data, N = 128, K = 10, 20 dB.
Outcome complete_data() {
    SignalSpec spec;
    spec.n = 128;
    spec.k = 10;
    spec.snr_db = 20.0;
    EstimatorOptions opt;
    opt.backend = Backend::Superfast;
    const Rates r = monte_carlo(spec, 100, 5005, opt, true);
    const double gap = db(r.nmse) - db(r.oracle);
    return {r.bsr >= 0.85 && r.csr >= 0.95 && gap <= 2.0,
            fmt("100 trials; BSR %.2f (>= 0.85), CSR %.3f (>= 0.95), NMSE %.2f dB vs oracle %.2f dB, gap %.2f dB (<= 2)",
                r.bsr, r.csr, db(r.nmse), db(r.oracle), gap)};
}

// 6. Five close pairs.
Outcome super_resolution() {
    SignalSpec spec;
    spec.n = 128;
    spec.k = 10;
    spec.snr_db = 20.0;
    spec.pair_separation = 1.0 / 128.0;
    const Rates a = monte_carlo(spec, 100, 6006, {});
    spec.pair_separation = 2.0 / 128.0;
    const Rates b = monte_carlo(spec, 100, 6007, {});
    return {a.csr >= 0.9 && b.bsr >= 0.85,
            fmt("100 trials each; separation 1.0/N CSR %.3f (>= 0.9), separation 2.0/N BSR %.2f (>= 0.85)", a.csr, b.bsr)};
}

// 7. Incomplete data, M / N = 0.75.
Outcome incomplete_data() {
    SignalSpec spec;
    spec.n = 128;
    spec.m = 96;
    spec.k = 10;
    spec.snr_db = 20.0;
    EstimatorOptions opt;
    opt.backend = Backend::Semifast;
    const Rates r = monte_carlo(spec, 100, 7007, opt);
    return {r.bsr >= 0.8 && r.csr >= 0.95, fmt("100 trials, semifast; BSR %.2f (>= 0.8), CSR %.3f (>= 0.95)", r.bsr, r.csr)};
}

// 8. Per-iteration time of the superfast backend.
Outcome complexity_scaling() {
    const std::vector<std::size_t> sizes = {2048, 4096, 8192, 16384};
    const std::size_t trials = 5;
    std::vector<double> per_iter, iters;
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        SignalSpec spec;
        spec.n = sizes[si];
        spec.k = 15;
        spec.snr_db = 20.0;
        EstimatorOptions opt;
        opt.backend = Backend::Superfast;
        std::vector<double> ms, it;
        for (std::size_t t = 0; t < trials; ++t) {
            const auto sig = make(spec, derive_seed(8008, si, t));
            const auto t0 = std::chrono::steady_clock::now();
            const LseResult r = estimate(sig.obs, opt);
            const double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            ms.push_back(wall / static_cast<double>(r.iterations));
            it.push_back(static_cast<double>(r.iterations));
        }
        std::sort(ms.begin(), ms.end());
        std::sort(it.begin(), it.end());
        per_iter.push_back(ms[trials / 2]);
        iters.push_back(it[trials / 2]);
    }
    const double ratio = per_iter.back() / per_iter[per_iter.size() - 2];
    const double spread = *std::max_element(iters.begin(), iters.end()) / *std::min_element(iters.begin(), iters.end());
    std::string times;
    for (std::size_t i = 0; i < sizes.size(); ++i) times += fmt(" N=%zu %.1f ms/iter (%.0f iters);", sizes[i], per_iter[i], iters[i]);
    return {ratio <= 2.6 && spread <= 2.0,
            fmt("K=15, median of %zu;%s ratio t(2^14)/t(2^13) %.2f (<= 2.6), iteration spread %.2fx (<= 2)", trials,
                times.c_str(), ratio, spread)};
}

// 9. Multiple snapshots.
Outcome multiple_snapshots() {
    bool identical = true;
    for (std::uint64_t t = 0; t < 5; ++t) {
        SignalSpec spec;
        spec.n = 64;
        spec.k = 5;
        spec.snr_db = 15.0;
        const auto sig = make(spec, derive_seed(9009, 1, t));
        const LseResult a = estimate(sig.obs), b = estimate_mmv(sig.obs);
        identical = identical && a.theta == b.theta && a.gamma == b.gamma && a.alpha == b.alpha &&
                    a.objective_trace == b.objective_trace && a.beta == b.beta && a.zeta == b.zeta;
    }
    SignalSpec spec;
    spec.n = 32;
    spec.k = 3;
    spec.snr_db = 10.0;
    spec.snapshots = 10;
    double bsr = 0.0;
    for (std::uint64_t t = 0; t < 50; ++t) {
        const auto sig = make(spec, derive_seed(9009, 2, t));
        bsr += block_success(sig.truth.theta, estimate_mmv(sig.obs).theta, spec.n);
    }
    bsr /= 50.0;
    return {identical && bsr >= 0.9,
            fmt("G=1 bit-identical to single snapshot: %s; G=10, N=32, K=3, 10 dB, 50 trials BSR %.2f (>= 0.9)",
                identical ? "yes" : "no", bsr)};
}

// 10. Gridded transforms against plain summation.
Outcome nufft_accuracy() {
    std::mt19937_64 rng(10010);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 16 + static_cast<std::size_t>(u(rng) * 4080);
        const std::size_t k = 1 + static_cast<std::size_t>(u(rng) * 100);
        std::vector<double> th(k);
        for (auto& t : th) t = u(rng);
        const FrequencySet f(th);
        CVector a(k), x(n);
        for (auto& v : a) v = cplx(g(rng), g(rng));
        for (auto& v : x) v = cplx(g(rng), g(rng));
        CVector fwd(n, cplx(0.0)), adj(k, cplx(0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                const double ph = kTwoPi * std::fmod(static_cast<double>(i) * th[j], 1.0);
                const cplx e(std::cos(ph), std::sin(ph));
                fwd[i] += e * a[j];
                adj[j] += std::conj(e) * x[i];
            }
        for (auto m : {NufftMethod::Gridding, NufftMethod::Auto}) {
            worst = std::max(worst, rel(steer_forward(f, a, n, m), fwd));
            worst = std::max(worst, rel(steer_adjoint(f, x, m), adj));
        }
    }
    return {worst < 1e-10, fmt("100 configurations, N in [16, 4096], K <= 100; worst relative error %.2e (tol 1e-10)", worst)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
        {"oracle equivalence", oracle_equivalence},
        {"gradient and Hessian", derivative_checks},
        {"monotone objective", monotone_objective},
        {"backend agreement", backend_agreement},
        {"complete data N=128", complete_data},
        {"super-resolution pairs", super_resolution},
        {"incomplete data M/N=0.75", incomplete_data},
        {"complexity scaling", complexity_scaling},
        {"multiple snapshots", multiple_snapshots},
        {"NUFFT accuracy", nufft_accuracy},
    };
    std::set<std::size_t> only;
    for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::atoi(argv[i])));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!only.empty() && !only.count(i + 1)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(), sec);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed ? 1 : 0;
}
