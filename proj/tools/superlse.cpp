// superlse: estimate line spectra from JSON signal files, generate synthetic
// signals and run Monte Carlo sweeps.
//
// Exit codes: 0 success, 2 input error, 3 numerical failure, 130 interrupted.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <superlse/benchmark.hpp>
#include <superlse/estimator.hpp>
#include <superlse/io.hpp>
#include <superlse/simdata.hpp>

using namespace superlse;

namespace {

constexpr int kInputError = 2;
constexpr int kNumericalError = 3;
constexpr int kInterrupted = 130;

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) { g_stop.store(true); }

struct EstimatorFlags {
    std::string backend = "auto";
    std::uint64_t seed = 0;
    double tau = 5.0;
    std::size_t grid_factor = 8;
    std::size_t max_iters = 200;
};

void add_estimator_flags(CLI::App* app, EstimatorFlags& f) {
    app->add_option("--backend", f.backend, "auto, superfast or semifast")
        ->check(CLI::IsMember({"auto", "superfast", "semifast"}));
    app->add_option("--tau", f.tau, "activation threshold margin")->check(CLI::NonNegativeNumber);
    app->add_option("--grid-factor", f.grid_factor, "activation grid oversampling")->check(CLI::PositiveNumber);
    app->add_option("--max-iters", f.max_iters, "maximum outer iterations")->check(CLI::PositiveNumber);
}

EstimatorOptions to_options(const EstimatorFlags& f) {
    EstimatorOptions o;
    o.backend = f.backend == "superfast" ? Backend::Superfast : f.backend == "semifast" ? Backend::Semifast : Backend::Auto;
    o.seed = f.seed;
    o.tau = f.tau;
    o.grid_factor = f.grid_factor;
    o.max_outer_iterations = f.max_iters;
    return o;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") std::cout << text;
    else io::write_file(path, text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian line spectral estimation"};
    app.require_subcommand(1);

    EstimatorFlags est_flags;
    std::string est_input, est_output;
    bool est_no_timing = false;
    auto* est = app.add_subcommand("estimate", "estimate frequencies from a signal file");
    est->add_option("input", est_input, "signal JSON file")->required();
    est->add_option("--output,-o", est_output, "result JSON file (default stdout)");
    est->add_option("--seed", est_flags.seed, "recorded in the result; estimation is deterministic");
    est->add_flag("--no-timing", est_no_timing, "omit wall-clock timings from the result");
    add_estimator_flags(est, est_flags);

    SignalSpec gen_spec;
    std::uint64_t gen_seed = 0;
    std::string gen_output, gen_truth;
    double gen_ratio = 1.0;
    auto* gen = app.add_subcommand("generate", "write a synthetic signal and its ground truth");
    gen->add_option("--n", gen_spec.n, "signal length N")->check(CLI::PositiveNumber);
    gen->add_option("--k", gen_spec.k, "number of components");
    gen->add_option("--snr", gen_spec.snr_db, "SNR in dB");
    gen->add_option("--ratio", gen_ratio, "observed fraction M / N")->check(CLI::Range(0.0, 1.0));
    gen->add_option("--min-sep", gen_spec.min_separation, "minimum frequency separation (default 2 / N)");
    gen->add_option("--pair-sep", gen_spec.pair_separation, "generate close pairs with this separation");
    gen->add_option("--snapshots", gen_spec.snapshots, "number of snapshots")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "random seed");
    gen->add_option("--output,-o", gen_output, "signal JSON file (default stdout)");
    gen->add_option("--truth", gen_truth, "ground truth JSON file");

    EstimatorFlags bench_flags;
    std::string bench_config, bench_sweep, bench_output;
    std::optional<std::uint64_t> bench_seed;
    std::optional<std::size_t> bench_trials;
    bool bench_timing = false, bench_no_timing = false;
    auto* bench = app.add_subcommand("benchmark", "run a Monte Carlo sweep and write CSV");
    bench->add_option("config", bench_config, "sweep configuration JSON file");
    bench->add_option("--sweep", bench_sweep, "run a sweep with its default parameters instead of a config file");
    bench->add_option("--output,-o", bench_output, "CSV file (default stdout)");
    bench->add_option("--seed", bench_seed, "base seed");
    bench->add_option("--trials", bench_trials, "trials per sweep point")->check(CLI::PositiveNumber);
    bench->add_flag("--timing", bench_timing, "record wall-clock columns");
    bench->add_flag("--no-timing", bench_no_timing, "leave wall-clock columns empty");
    auto* bb = bench->add_option("--backend", bench_flags.backend, "auto, superfast or semifast")
                   ->check(CLI::IsMember({"auto", "superfast", "semifast"}));
    auto* bt = bench->add_option("--tau", bench_flags.tau, "activation threshold margin")->check(CLI::NonNegativeNumber);
    auto* bg = bench->add_option("--grid-factor", bench_flags.grid_factor, "activation grid oversampling")
                   ->check(CLI::PositiveNumber);
    auto* bm = bench->add_option("--max-iters", bench_flags.max_iters, "maximum outer iterations")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInputError;
    }

    try {
        if (*est) {
            const Observation obs = io::read_signal(est_input);
            const LseResult r = estimate(obs, to_options(est_flags));
            io::json j = io::result_json(r, !est_no_timing);
            j["seed"] = est_flags.seed;
            emit(est_output, io::to_string(j));
            for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
            return 0;
        }
        if (*gen) {
            gen_spec.m = gen_ratio >= 1.0 ? 0 : static_cast<std::size_t>(std::lround(gen_ratio * static_cast<double>(gen_spec.n)));
            if (gen_spec.m == gen_spec.n) gen_spec.m = 0;
            Rng rng(gen_seed);
            const SyntheticSignal sig = generate(gen_spec, rng);
            emit(gen_output, io::to_string(io::signal_json(sig.obs)));
            if (!gen_truth.empty()) {
                io::json t = io::truth_json(sig.truth);
                t["seed"] = gen_seed;
                io::write_file(gen_truth, io::to_string(t));
            }
            return 0;
        }
        if (*bench) {
            if (bench_config.empty() == bench_sweep.empty())
                throw InputError("benchmark needs either a config file or --sweep");
            bench::BenchmarkConfig cfg =
                bench_config.empty() ? bench::default_config(bench::parse_sweep(bench_sweep))
                                     : bench::config_from_json(io::parse(io::read_file(bench_config), bench_config), bench_config);
            if (bench_seed) cfg.seed = *bench_seed;
            if (bench_trials) cfg.trials = *bench_trials;
            if (bench_timing) cfg.timing = true;
            if (bench_no_timing) cfg.timing = false;
            const EstimatorOptions flags = to_options(bench_flags);
            if (bb->count()) cfg.estimator.backend = flags.backend;
            if (bt->count()) cfg.estimator.tau = flags.tau;
            if (bg->count()) cfg.estimator.grid_factor = flags.grid_factor;
            if (bm->count()) cfg.estimator.max_outer_iterations = flags.max_outer_iterations;

            std::signal(SIGINT, on_sigint);
            const bench::BenchmarkResult res = bench::run(cfg, &g_stop);
            std::ostringstream csv;
            bench::write_csv(csv, cfg, res);
            emit(bench_output, csv.str());
            std::size_t errors = 0;
            for (const auto& r : res.rows)
                if (!r.ok) ++errors;
            if (errors) std::cerr << "warning: " << errors << " trials failed\n";
            if (res.interrupted) {
                std::cerr << "interrupted: wrote " << res.rows.size() << " completed trials\n";
                return kInterrupted;
            }
            return 0;
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumericalError;
    }
    return 0;
}
