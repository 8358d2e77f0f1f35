#include <gtest/gtest.h>

#include <superlse/io.hpp>

using namespace superlse;

namespace {

std::string error_of(const std::string& text) {
    try {
        io::signal_from_json(io::parse(text, "sig"), "sig");
    } catch (const InputError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Io, NumbersUseSeventeenDigits) {
    EXPECT_EQ(io::format_number(0.1), "0.10000000000000001");
    EXPECT_EQ(io::format_number(-2.0), "-2");
    EXPECT_THROW(io::format_number(std::nan("")), InputError);
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.normal() * std::pow(10.0, static_cast<double>(rng.index(40)) - 20.0);
        EXPECT_EQ(std::stod(io::format_number(v)), v);
    }
}

TEST(Io, CompleteSignalRoundTripsExactly) {
    Rng rng(2);
    SignalSpec spec;
    spec.n = 32;
    spec.k = 3;
    spec.snapshots = 2;
    auto sig = generate(spec, rng);
    const std::string text = io::to_string(io::signal_json(sig.obs));
    EXPECT_NE(text.find("\"pattern\": \"complete\""), std::string::npos);
    auto back = io::signal_from_json(io::parse(text));
    EXPECT_TRUE(back.is_complete());
    EXPECT_EQ(back.n(), 32u);
    EXPECT_EQ(back.snapshots(), sig.obs.snapshots());
    EXPECT_EQ(io::to_string(io::signal_json(back)), text);
}

TEST(Io, IncompleteSignalRoundTripsExactly) {
    Observation obs = Observation::incomplete(10, {0, 3, 4, 9}, {{1.0, 0.0}, {0.5, -0.25}, {2.0, 0.0}, {1.0, 1.0}},
                                              {{{0.1, 0.2}, {1e-300, -3.0}, {7.0, 0.0}, {0.0, 1.0 / 3.0}}});
    auto back = io::signal_from_json(io::parse(io::to_string(io::signal_json(obs))));
    EXPECT_FALSE(back.is_complete());
    EXPECT_EQ(back.indices(), obs.indices());
    EXPECT_EQ(back.scales(), obs.scales());
    EXPECT_EQ(back.snapshots(), obs.snapshots());
}

TEST(Io, ScalesDefaultToOne) {
    auto obs = io::signal_from_json(io::parse(R"({"n": 4, "pattern": {"indices": [0, 3]}, "snapshots": [[[1, 0], [0, 1]]]})"));
    EXPECT_EQ(obs.m(), 2u);
    EXPECT_EQ(obs.scales()[1], cplx(1.0));
}

TEST(Io, SyntaxErrorsReportLineAndColumn) {
    const std::string msg = error_of("{\n  \"n\": 4,\n  \"pattern\": complete\n}");
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column"), std::string::npos) << msg;
}

TEST(Io, SchemaErrorsNameTheField) {
    EXPECT_NE(error_of(R"({"pattern": "complete", "snapshots": [[[1, 0]]]})").find("missing field \"n\""), std::string::npos);
    EXPECT_NE(error_of(R"({"n": 2, "pattern": "complete", "snapshots": [[[1, 0], [1]]]})").find("snapshots[0][1]"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"n": 3, "pattern": "complete", "snapshots": [[[1, 0], [1, 0]]]})").find("complete data needs 3"),
              std::string::npos);
    EXPECT_THROW(io::signal_from_json(io::parse(R"({"n": 4, "pattern": {"indices": [2, 1]}, "snapshots": [[[1, 0], [0, 1]]]})")),
                 InvalidPattern);
    EXPECT_THROW(io::signal_from_json(io::parse(R"({"n": 4, "pattern": "partial", "snapshots": [[[1, 0]]]})")), InvalidPattern);
    EXPECT_THROW(io::signal_from_json(io::parse(R"({"n": -1, "pattern": "complete", "snapshots": [[[1, 0]]]})")), InputError);
}

TEST(Io, TruthRoundTrip) {
    Rng rng(3);
    SignalSpec spec;
    spec.n = 16;
    spec.k = 2;
    auto sig = generate(spec, rng);
    auto back = io::truth_from_json(io::parse(io::to_string(io::truth_json(sig.truth))));
    EXPECT_EQ(back.n, sig.truth.n);
    EXPECT_EQ(back.theta, sig.truth.theta);
    EXPECT_EQ(back.alpha, sig.truth.alpha);
    EXPECT_EQ(back.beta, sig.truth.beta);
}

TEST(Io, ResultJsonFields) {
    Rng rng(4);
    SignalSpec spec;
    spec.n = 32;
    spec.k = 2;
    auto sig = generate(spec, rng);
    auto r = estimate(sig.obs);
    auto j = io::parse(io::to_string(io::result_json(r, false)));
    EXPECT_EQ(j["k_hat"].get<std::size_t>(), r.k_hat);
    EXPECT_EQ(j["theta"].get<std::vector<double>>(), r.theta);
    EXPECT_EQ(j["trace"]["objective"].size(), r.objective_trace.size());
    EXPECT_FALSE(j.contains("timing_seconds"));
    EXPECT_TRUE(io::result_json(r, true).contains("timing_seconds"));
    EXPECT_EQ(io::to_string(io::result_json(r, false)), io::to_string(io::result_json(estimate(sig.obs), false)));
}
