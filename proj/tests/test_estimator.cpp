#include <gtest/gtest.h>

#include <cmath>

#include <superlse/estimator.hpp>
#include <superlse/simdata.hpp>

using namespace superlse;

namespace {

SyntheticSignal make(std::size_t n, std::size_t k, double snr, std::uint64_t seed, std::size_t snaps = 1) {
    Rng rng(seed);
    SignalSpec spec;
    spec.n = n;
    spec.k = k;
    spec.snr_db = snr;
    spec.snapshots = snaps;
    return generate(spec, rng);
}

}  // namespace

TEST(Estimator, UpdateZeta) {
    EstimationState s;
    s.k_max = 12;
    s.theta = {0.1, 0.2, 0.3};
    s.gamma = {1, 1, 1};
    EXPECT_DOUBLE_EQ(update_zeta(s), 0.25);
    s.k_max = 3;
    EXPECT_DOUBLE_EQ(update_zeta(s), 0.5);
    s.theta.clear();
    s.gamma.clear();
    s.zeta = update_zeta(s);
    EXPECT_DOUBLE_EQ(s.zeta, 0.0);
    EXPECT_DOUBLE_EQ(effective_zeta(s), 1.0 / 6.0);
}

TEST(Estimator, UpdateBetaWithoutComponentsIsDataPower) {
    auto sig = make(32, 3, 10.0, 1);
    EstimationState s;
    s.k_max = 32;
    s.beta = 0.3;
    ModelEvaluation ev(s, sig.obs);
    EXPECT_NEAR(update_beta(ev, sig.obs, 1e-30), sig.obs.energy() / 32.0, 1e-12 * sig.obs.energy());
    EXPECT_DOUBLE_EQ(update_beta(ev, sig.obs, 1e6), 1e6);
}

TEST(Estimator, UpdateBetaNeverIncreasesObjective) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        auto sig = make(32, 3, 10.0, 100 + trial, 1 + trial % 3);
        EstimationState s;
        s.k_max = 32;
        s.zeta = 0.1;
        s.beta = 0.01 + rng.uniform();
        for (int k = 0; k < 4; ++k) s.add(rng.uniform(), 0.05 + rng.uniform());
        ModelEvaluation ev(s, sig.obs);
        const double before = ev.objective();
        s.beta = update_beta(ev, sig.obs, 1e-12);
        EXPECT_LE(objective(s, sig.obs), before + 1e-10 * std::abs(before));
    }
}

TEST(Estimator, NoiseFreeSingleSinusoid) {
    const std::size_t n = 64;
    const double theta = 0.3141;
    const cplx a(0.7, -0.4);
    CVector y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = a * std::polar(1.0, kTwoPi * theta * static_cast<double>(i));
    auto r = estimate(Observation::complete({y}));
    ASSERT_EQ(r.k_hat, 1u);
    EXPECT_LT(wrap_distance(r.theta[0], theta), 1e-4);
    GroundTruth truth{n, {theta}, {CVector{a}}, 0.0, 0.0};
    EXPECT_LT(nmse(truth, r.theta, r.alpha), 1e-6);
}

TEST(Estimator, PureNoiseGivesNoComponents) {
    std::size_t empty = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        CVector y(64);
        for (auto& v : y) v = rng.complex_normal(2.0);
        auto obs = Observation::complete({y});
        auto r = estimate(obs);
        if (r.k_hat == 0) {
            ++empty;
            EXPECT_NEAR(r.beta, obs.energy() / 64.0, 0.2 * obs.energy() / 64.0);
        }
    }
    EXPECT_GE(empty, 45u);
}

TEST(Estimator, ZeroDataReturnsEmptyResult) {
    auto r = estimate(Observation::complete({CVector(16, cplx(0.0))}));
    EXPECT_EQ(r.k_hat, 0u);
    EXPECT_TRUE(r.converged);
    EXPECT_FALSE(r.warnings.empty());
}

TEST(Estimator, ObjectiveTraceIsMonotone) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        auto sig = make(64, 5, 15.0, seed);
        auto r = estimate(sig.obs);
        ASSERT_EQ(r.objective_trace.size(), r.trace_blocks.size());
        for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
            EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1] + 1e-9 * 64.0)
                << "seed " << seed << " block " << block_name(r.trace_blocks[i]);
    }
}

TEST(Estimator, ResultShapeAndOrdering) {
    auto sig = make(64, 4, 20.0, 3, 2);
    auto r = estimate(sig.obs);
    EXPECT_EQ(r.theta.size(), r.k_hat);
    EXPECT_EQ(r.gamma.size(), r.k_hat);
    ASSERT_EQ(r.alpha.size(), 2u);
    for (const auto& a : r.alpha) EXPECT_EQ(a.size(), r.k_hat);
    EXPECT_TRUE(std::is_sorted(r.theta.begin(), r.theta.end()));
    for (double t : r.theta) {
        EXPECT_GE(t, 0.0);
        EXPECT_LT(t, 1.0);
    }
    EXPECT_TRUE(r.converged);
    EXPECT_GT(r.beta, 0.0);
}

TEST(Estimator, IsDeterministic) {
    auto sig = make(64, 5, 10.0, 4);
    auto a = estimate(sig.obs);
    auto b = estimate(sig.obs);
    EXPECT_EQ(a.theta, b.theta);
    EXPECT_EQ(a.gamma, b.gamma);
    EXPECT_EQ(a.objective_trace, b.objective_trace);
    EXPECT_EQ(a.beta, b.beta);
}

TEST(Estimator, RecoversTonesAtHighSnr) {
    std::size_t ok = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto sig = make(128, 10, 20.0, seed);
        auto r = estimate(sig.obs);
        ok += block_success(sig.truth.theta, r.theta, 128);
    }
    EXPECT_GE(ok, 9u);
}

TEST(Estimator, BackendsAgreeOnCompleteData) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto sig = make(64, 5, 15.0, 50 + seed);
        EstimatorOptions a, b;
        a.backend = Backend::Superfast;
        b.backend = Backend::Semifast;
        auto ra = estimate(sig.obs, a);
        auto rb = estimate(sig.obs, b);
        ASSERT_EQ(ra.k_hat, rb.k_hat);
        for (std::size_t k = 0; k < ra.k_hat; ++k) EXPECT_LT(wrap_distance(ra.theta[k], rb.theta[k]), 1e-6);
    }
}

TEST(Estimator, SuperfastRejectsIncompleteData) {
    Rng rng(1);
    SignalSpec spec;
    spec.n = 32;
    spec.m = 20;
    spec.k = 2;
    auto sig = generate(spec, rng);
    EstimatorOptions opt;
    opt.backend = Backend::Superfast;
    EXPECT_THROW(estimate(sig.obs, opt), InvalidPattern);
}

TEST(Estimator, IncompleteDataRecovery) {
    std::size_t ok = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        SignalSpec spec;
        spec.n = 128;
        spec.m = 96;
        spec.k = 10;
        auto sig = generate(spec, rng);
        ok += block_success(sig.truth.theta, estimate(sig.obs).theta, 128);
    }
    EXPECT_GE(ok, 8u);
}

TEST(Estimator, MmvWithOneSnapshotMatchesSmv) {
    auto sig = make(64, 5, 15.0, 7);
    auto a = estimate(sig.obs);
    auto b = estimate_mmv(sig.obs);
    EXPECT_EQ(a.theta, b.theta);
    EXPECT_EQ(a.gamma, b.gamma);
    EXPECT_EQ(a.alpha, b.alpha);
    EXPECT_EQ(a.objective_trace, b.objective_trace);
}

TEST(Estimator, MmvIdenticalNoiseFreeSnapshots) {
    const std::size_t n = 32;
    const std::vector<double> theta = {0.21, 0.64};
    CVector y = steer_forward_raw(theta, CVector{{1.0, 0.2}, {-0.5, 0.6}}, n);
    auto r = estimate_mmv(Observation::complete(std::vector<CVector>(10, y)));
    ASSERT_EQ(r.k_hat, 2u);
    EXPECT_LT(wrap_distance(r.theta[0], theta[0]), 1e-4);
    EXPECT_LT(wrap_distance(r.theta[1], theta[1]), 1e-4);
}

TEST(Estimator, MmvRecovery) {
    std::size_t ok = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto sig = make(32, 3, 10.0, seed, 10);
        ok += block_success(sig.truth.theta, estimate_mmv(sig.obs).theta, 32);
    }
    EXPECT_GE(ok, 9u);
}
