#pragma once

// Seeded Monte Carlo sweeps.  Every trial draws its signal from
// derive_seed(seed, point index, trial index), so results do not depend on
// the number of worker threads or the order in which trials finish.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "estimator.hpp"
#include "io.hpp"
#include "simdata.hpp"

namespace superlse::bench {

enum class Sweep { Snr, PairSeparation, SubsamplingRatio, RuntimeVsN, RuntimeVsK, PhaseTransition };

inline const char* sweep_name(Sweep s) {
    switch (s) {
        case Sweep::Snr: return "snr";
        case Sweep::PairSeparation: return "pair_separation";
        case Sweep::SubsamplingRatio: return "subsampling_ratio";
        case Sweep::RuntimeVsN: return "runtime_vs_n";
        case Sweep::RuntimeVsK: return "runtime_vs_k";
        case Sweep::PhaseTransition: return "phase_transition";
    }
    return "?";
}

inline Sweep parse_sweep(const std::string& s) {
    for (Sweep v : {Sweep::Snr, Sweep::PairSeparation, Sweep::SubsamplingRatio, Sweep::RuntimeVsN, Sweep::RuntimeVsK,
                    Sweep::PhaseTransition})
        if (s == sweep_name(v)) return v;
    throw InputError("unknown sweep \"" + s + "\"");
}

// points holds the swept value: SNR in dB, pair separation in units of 1 / N,
// M / N, N, K, or K / N for the phase transition, whose second axis is the
// pair separation in units of 1 / N.
struct BenchmarkConfig {
    Sweep sweep = Sweep::Snr;
    std::vector<double> points;
    std::vector<double> secondary;
    std::size_t n = 128;
    std::size_t k = 10;
    double snr_db = 20.0;
    double subsampling_ratio = 1.0;
    double pair_separation = -1.0;  // units of 1 / N; negative means isolated frequencies
    std::size_t snapshots = 1;
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    bool timing = false;
    EstimatorOptions estimator;
};

// Parameters from the figure captions for each sweep.
inline BenchmarkConfig default_config(Sweep s) {
    BenchmarkConfig c;
    c.sweep = s;
    switch (s) {
        case Sweep::Snr: c.points = {0, 5, 10, 15, 20, 25, 30}; break;
        case Sweep::PairSeparation: c.points = {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0}; break;
        case Sweep::SubsamplingRatio: c.points = {0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}; break;
        case Sweep::RuntimeVsN:
            c.points = {1024, 2048, 4096, 8192, 16384};
            c.k = 15;
            c.trials = 20;
            c.timing = true;
            break;
        case Sweep::RuntimeVsK:
            c.points = {4, 8, 16, 32, 64};
            c.n = 4096;
            c.trials = 20;
            c.timing = true;
            break;
        case Sweep::PhaseTransition:
            c.points = {0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
            c.secondary = {0.5, 1.0, 1.5, 2.0};
            c.trials = 120;
            break;
    }
    return c;
}

inline BenchmarkConfig config_from_json(const io::json& j, const std::string& source = "config") {
    if (!j.is_object()) throw InputError(source + ": expected an object");
    auto sweep_it = j.find("sweep");
    if (sweep_it == j.end() || !sweep_it->is_string()) throw InputError(source + ": missing string field \"sweep\"");
    BenchmarkConfig c = default_config(parse_sweep(sweep_it->get<std::string>()));
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const auto& v = it.value();
        const std::string where = source + "." + key;
        if (key == "sweep") continue;
        if (key == "points") c.points = io::detail::real_vector(v, where);
        else if (key == "secondary") c.secondary = io::detail::real_vector(v, where);
        else if (key == "n") c.n = io::detail::count(v, where);
        else if (key == "k") c.k = io::detail::count(v, where);
        else if (key == "snr_db") c.snr_db = io::detail::number(v, where);
        else if (key == "subsampling_ratio") c.subsampling_ratio = io::detail::number(v, where);
        else if (key == "pair_separation") c.pair_separation = io::detail::number(v, where);
        else if (key == "snapshots") c.snapshots = io::detail::count(v, where);
        else if (key == "trials") c.trials = io::detail::count(v, where);
        else if (key == "seed") {
            if (!v.is_number_unsigned()) throw InputError(where + ": expected a non-negative integer");
            c.seed = v.get<std::uint64_t>();
        }
        else if (key == "timing") {
            if (!v.is_boolean()) throw InputError(where + ": expected true or false");
            c.timing = v.get<bool>();
        } else if (key == "backend") {
            if (!v.is_string()) throw InputError(where + ": expected a string");
            const auto b = v.get<std::string>();
            if (b == "auto") c.estimator.backend = Backend::Auto;
            else if (b == "superfast") c.estimator.backend = Backend::Superfast;
            else if (b == "semifast") c.estimator.backend = Backend::Semifast;
            else throw InputError(where + ": expected auto, superfast or semifast");
        } else if (key == "tau") c.estimator.tau = io::detail::number(v, where);
        else if (key == "grid_factor") c.estimator.grid_factor = io::detail::count(v, where);
        else if (key == "max_iters") c.estimator.max_outer_iterations = io::detail::count(v, where);
        else throw InputError(where + ": unknown field");
    }
    return c;
}

inline void validate(const BenchmarkConfig& c) {
    if (c.points.empty()) throw InputError("sweep needs at least one point");
    if (c.sweep == Sweep::PhaseTransition && c.secondary.empty()) throw InputError("phase transition needs separations");
    if (c.trials == 0) throw InputError("trials must be positive");
    if (c.snapshots == 0) throw InputError("snapshots must be positive");
    for (double p : c.points) {
        if (!std::isfinite(p)) throw InputError("sweep points must be finite");
        if ((c.sweep == Sweep::RuntimeVsN || c.sweep == Sweep::RuntimeVsK) && (p < 1.0 || p != std::floor(p)))
            throw InputError("sweep points must be positive integers");
        if (c.sweep == Sweep::SubsamplingRatio && !(p > 0.0 && p <= 1.0)) throw InputError("M / N must lie in (0, 1]");
        if (c.sweep == Sweep::PhaseTransition && !(p > 0.0 && p < 1.0)) throw InputError("K / N must lie in (0, 1)");
    }
}

struct TrialRow {
    std::size_t point = 0, secondary = 0, trial = 0;
    std::uint64_t seed = 0;
    std::size_t n = 0, m = 0, k = 0;
    double snr_db = 0.0, value = 0.0, value2 = 0.0;
    bool ok = false;
    std::string error;
    std::size_t k_hat = 0;
    double nmse = 0.0, oracle_nmse = 0.0, csr = 0.0;
    bool bsr = false;
    std::size_t iterations = 0;
    double wall_ms = 0.0;
};

struct BenchmarkResult {
    std::vector<TrialRow> rows;  // completed trials in (point, secondary, trial) order
    bool interrupted = false;
};

// Resolved signal parameters of one sweep point.
inline SignalSpec point_spec(const BenchmarkConfig& c, double v, double v2) {
    SignalSpec s;
    s.n = c.n;
    s.k = c.k;
    s.snr_db = c.snr_db;
    s.snapshots = c.snapshots;
    double ratio = c.subsampling_ratio;
    double pair = c.pair_separation;
    switch (c.sweep) {
        case Sweep::Snr: s.snr_db = v; break;
        case Sweep::PairSeparation: pair = v; break;
        case Sweep::SubsamplingRatio: ratio = v; break;
        case Sweep::RuntimeVsN: s.n = static_cast<std::size_t>(v); break;
        case Sweep::RuntimeVsK: s.k = static_cast<std::size_t>(v); break;
        case Sweep::PhaseTransition:
            s.k = 2 * std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(v * static_cast<double>(c.n) / 2.0)));
            pair = v2;
            break;
    }
    const std::size_t m = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(s.n)));
    s.m = m >= s.n ? 0 : std::max<std::size_t>(m, 2);
    if (pair > 0.0) s.pair_separation = pair / static_cast<double>(s.n);
    return s;
}

inline TrialRow run_trial(const BenchmarkConfig& c, std::size_t pi, std::size_t si, std::size_t t) {
    TrialRow row;
    row.point = pi;
    row.secondary = si;
    row.trial = t;
    row.value = c.points[pi];
    row.value2 = c.secondary.empty() ? 0.0 : c.secondary[si];
    row.seed = derive_seed(c.seed, pi * std::max<std::size_t>(c.secondary.size(), 1) + si, t);
    const SignalSpec spec = point_spec(c, row.value, row.value2);
    row.n = spec.n;
    row.m = spec.m == 0 ? spec.n : spec.m;
    row.k = spec.k;
    row.snr_db = spec.snr_db;
    try {
        Rng rng(row.seed);
        const SyntheticSignal sig = generate(spec, rng);
        EstimatorOptions opt = c.estimator;
        opt.seed = row.seed;
        const auto t0 = std::chrono::steady_clock::now();
        const LseResult r = estimate(sig.obs, opt);
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        row.k_hat = r.k_hat;
        row.iterations = r.iterations;
        row.nmse = nmse(sig.truth, r.theta, r.alpha);
        row.oracle_nmse = oracle_nmse(sig);
        row.bsr = block_success(sig.truth.theta, r.theta, spec.n);
        row.csr = component_success(sig.truth.theta, r.theta, spec.n);
        row.ok = true;
    } catch (const Error& e) {
        row.error = e.what();
    }
    return row;
}

inline std::size_t worker_count(std::size_t jobs) {
    std::size_t n = std::max<std::size_t>(std::thread::hardware_concurrency(), 1);
    if (const char* env = std::getenv("SUPERLSE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) n = std::min(n, static_cast<std::size_t>(v));
    }
    return std::max<std::size_t>(std::min(n, jobs), 1);
}

// Runs every trial; stops handing out work once *stop becomes true.
inline BenchmarkResult run(const BenchmarkConfig& c, const std::atomic<bool>* stop = nullptr, std::size_t threads = 0) {
    validate(c);
    const std::size_t ns = std::max<std::size_t>(c.secondary.size(), 1);
    const std::size_t total = c.points.size() * ns * c.trials;
    std::vector<std::optional<TrialRow>> slots(total);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            if (stop && stop->load()) return;
            const std::size_t j = next.fetch_add(1);
            if (j >= total) return;
            const std::size_t t = j % c.trials, rest = j / c.trials;
            slots[j] = run_trial(c, rest / ns, rest % ns, t);
        }
    };
    const std::size_t nw = threads ? std::min(threads, total) : worker_count(total);
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < nw; ++i) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    BenchmarkResult out;
    for (auto& s : slots) {
        if (s) out.rows.push_back(std::move(*s));
        else out.interrupted = true;
    }
    return out;
}

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace detail

inline const char* kCsvHeader =
    "row,sweep,point,secondary,trial,seed,n,m,k,snr_db,status,k_hat,nmse,oracle_nmse,bsr,csr,iterations,wall_ms,ms_per_iter";

// Trial rows, then one aggregate row per sweep point.  Aggregates average
// over successful trials; the trial column holds their count.  Timing
// columns are left empty unless timing is enabled.
inline void write_csv(std::ostream& os, const BenchmarkConfig& c, const BenchmarkResult& res) {
    using detail::num;
    const char* sweep = sweep_name(c.sweep);
    os << kCsvHeader << "\n";
    for (const auto& r : res.rows) {
        os << "trial," << sweep << "," << num(r.value) << "," << num(r.value2) << "," << r.trial << "," << r.seed << ","
           << r.n << "," << r.m << "," << r.k << "," << num(r.snr_db) << ",";
        if (!r.ok) {
            os << "error,,,,,,,,\n";
            continue;
        }
        os << "ok," << r.k_hat << "," << num(r.nmse) << "," << num(r.oracle_nmse) << "," << (r.bsr ? 1 : 0) << ","
           << num(r.csr) << "," << r.iterations << ",";
        if (c.timing)
            os << num(r.wall_ms) << "," << num(r.iterations ? r.wall_ms / static_cast<double>(r.iterations) : 0.0);
        else
            os << ",";
        os << "\n";
    }
    std::size_t i = 0;
    while (i < res.rows.size()) {
        std::size_t j = i;
        while (j < res.rows.size() && res.rows[j].point == res.rows[i].point && res.rows[j].secondary == res.rows[i].secondary) ++j;
        std::size_t ok = 0, bsr = 0, errors = 0;
        double k_hat = 0.0, nm = 0.0, on = 0.0, csr = 0.0, it = 0.0;
        std::vector<double> wall, per_iter;
        for (std::size_t r = i; r < j; ++r) {
            const auto& row = res.rows[r];
            if (!row.ok) {
                ++errors;
                continue;
            }
            ++ok;
            bsr += row.bsr;
            k_hat += static_cast<double>(row.k_hat);
            nm += row.nmse;
            on += row.oracle_nmse;
            csr += row.csr;
            it += static_cast<double>(row.iterations);
            wall.push_back(row.wall_ms);
            per_iter.push_back(row.iterations ? row.wall_ms / static_cast<double>(row.iterations) : 0.0);
        }
        const auto& f = res.rows[i];
        const double d = ok ? static_cast<double>(ok) : 1.0;
        os << "aggregate," << sweep << "," << num(f.value) << "," << num(f.value2) << "," << ok << ",," << f.n << ","
           << f.m << "," << f.k << "," << num(f.snr_db) << "," << (errors ? "errors=" + std::to_string(errors) : "ok") << ","
           << num(k_hat / d) << "," << num(nm / d) << "," << num(on / d) << ","
           << num(static_cast<double>(bsr) / d) << "," << num(csr / d) << "," << num(it / d) << ",";
        if (c.timing) os << num(detail::median(wall)) << "," << num(detail::median(per_iter));
        else os << ",";
        os << "\n";
        i = j;
    }
}

}  // namespace superlse::bench
