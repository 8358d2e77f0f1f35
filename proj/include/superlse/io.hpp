#pragma once

// JSON files: signals, ground truth and estimation results.  Numbers are
// written with 17 significant digits so doubles survive a round trip.
//
// Signal schema:
//   {"n": N, "pattern": "complete" | {"indices": [...], "scales": [[re, im], ...]},
//    "snapshots": [[[re, im], ...], ...]}

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "estimator.hpp"
#include "simdata.hpp"

namespace superlse::io {

using json = nlohmann::json;

inline std::string format_number(double v) {
    if (!std::isfinite(v)) throw InputError("cannot write a non-finite number to JSON");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline bool is_flat(const json& j) {
    for (const auto& e : j)
        if (e.is_structured()) return false;
    return true;
}

inline void dump(std::string& out, const json& j, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
    switch (j.type()) {
        case json::value_t::number_float: out += format_number(j.get<double>()); return;
        case json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += inner + json(it.key()).dump() + ": ";
                dump(out, it.value(), indent + 1);
            }
            out += "\n" + pad + "}";
            return;
        }
        case json::value_t::array: {
            // Arrays of scalars and of [re, im] pairs stay on one line.
            const bool flat = is_flat(j);
            const bool pairs = !flat && std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_array() && is_flat(e); });
            if (flat || pairs) {
                out += "[";
                for (std::size_t i = 0; i < j.size(); ++i) {
                    if (i) out += ", ";
                    dump(out, j[i], indent + 1);
                }
                out += "]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ",\n";
                out += inner;
                dump(out, j[i], indent + 1);
            }
            out += "\n" + pad + "]";
            return;
        }
        default: out += j.dump(); return;
    }
}

inline std::string position(std::string_view text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline const json& field(const json& j, const char* key, const std::string& where) {
    if (!j.is_object()) throw InputError(where + ": expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw InputError(where + ": missing field \"" + key + "\"");
    return *it;
}

inline double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw InputError(where + ": expected a number");
    return j.get<double>();
}

inline std::size_t count(const json& j, const std::string& where) {
    if (!j.is_number_integer() || (j.is_number_integer() && j.get<long long>() < 0))
        throw InputError(where + ": expected a non-negative integer");
    return j.get<std::size_t>();
}

inline cplx complex(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2) throw InputError(where + ": expected [re, im]");
    return {number(j[0], where + "[0]"), number(j[1], where + "[1]")};
}

inline CVector complex_vector(const json& j, const std::string& where) {
    if (!j.is_array()) throw InputError(where + ": expected an array");
    CVector out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(complex(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

inline std::vector<double> real_vector(const json& j, const std::string& where) {
    if (!j.is_array()) throw InputError(where + ": expected an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

}  // namespace detail

inline std::string to_string(const json& j) {
    std::string out;
    detail::dump(out, j, 0);
    out += "\n";
    return out;
}

inline json to_json(cplx v) { return json::array({v.real(), v.imag()}); }

inline json to_json(const CVector& v) {
    json out = json::array();
    for (auto x : v) out.push_back(to_json(x));
    return out;
}

// Parses JSON text; syntax errors report line and column.
inline json parse(std::string_view text, const std::string& source = "input") {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        std::string msg = e.what();
        if (auto p = msg.find("syntax error"); p != std::string::npos) msg = msg.substr(p);
        throw InputError(source + ": " + detail::position(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + msg);
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path);
    out << text;
    if (!out) throw InputError("failed writing " + path);
}

inline json signal_json(const Observation& obs) {
    json j;
    j["n"] = obs.n();
    if (obs.is_complete()) {
        j["pattern"] = "complete";
    } else {
        json p;
        p["indices"] = obs.indices();
        p["scales"] = to_json(obs.scales());
        j["pattern"] = std::move(p);
    }
    json snaps = json::array();
    for (const auto& y : obs.snapshots()) snaps.push_back(to_json(y));
    j["snapshots"] = std::move(snaps);
    return j;
}

inline Observation signal_from_json(const json& j, const std::string& source = "input") {
    const std::size_t n = detail::count(detail::field(j, "n", source), source + ".n");
    const json& pat = detail::field(j, "pattern", source);
    const json& sj = detail::field(j, "snapshots", source);
    if (!sj.is_array() || sj.empty()) throw InputError(source + ".snapshots: expected a non-empty array");
    std::vector<CVector> snaps;
    for (std::size_t g = 0; g < sj.size(); ++g)
        snaps.push_back(detail::complex_vector(sj[g], source + ".snapshots[" + std::to_string(g) + "]"));
    if (pat.is_string()) {
        if (pat.get<std::string>() != "complete") throw InvalidPattern(source + ".pattern: expected \"complete\" or an object");
        for (std::size_t g = 0; g < snaps.size(); ++g)
            if (snaps[g].size() != n)
                throw DimensionMismatch(source + ".snapshots[" + std::to_string(g) + "]: complete data needs " +
                                        std::to_string(n) + " samples, got " + std::to_string(snaps[g].size()));
        return Observation::complete(std::move(snaps));
    }
    const json& ij = detail::field(pat, "indices", source + ".pattern");
    if (!ij.is_array()) throw InvalidPattern(source + ".pattern.indices: expected an array");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ij.size(); ++i)
        idx.push_back(detail::count(ij[i], source + ".pattern.indices[" + std::to_string(i) + "]"));
    CVector scales;
    if (pat.contains("scales")) scales = detail::complex_vector(pat["scales"], source + ".pattern.scales");
    try {
        return Observation::incomplete(n, std::move(idx), std::move(scales), std::move(snaps));
    } catch (const InputError& e) {
        throw InvalidPattern(source + ": " + e.what());
    }
}

inline Observation read_signal(const std::string& path) { return signal_from_json(parse(read_file(path), path), path); }

inline void write_signal(const std::string& path, const Observation& obs) { write_file(path, to_string(signal_json(obs))); }

inline json truth_json(const GroundTruth& t) {
    json j;
    j["n"] = t.n;
    j["k"] = t.theta.size();
    j["theta"] = t.theta;
    json al = json::array();
    for (const auto& a : t.alpha) al.push_back(to_json(a));
    j["alpha"] = std::move(al);
    j["beta"] = t.beta;
    j["snr_db"] = t.snr_db;
    return j;
}

inline GroundTruth truth_from_json(const json& j, const std::string& source = "truth") {
    GroundTruth t;
    t.n = detail::count(detail::field(j, "n", source), source + ".n");
    t.theta = detail::real_vector(detail::field(j, "theta", source), source + ".theta");
    const json& al = detail::field(j, "alpha", source);
    if (!al.is_array()) throw InputError(source + ".alpha: expected an array");
    for (std::size_t g = 0; g < al.size(); ++g)
        t.alpha.push_back(detail::complex_vector(al[g], source + ".alpha[" + std::to_string(g) + "]"));
    t.beta = detail::number(detail::field(j, "beta", source), source + ".beta");
    t.snr_db = detail::number(detail::field(j, "snr_db", source), source + ".snr_db");
    return t;
}

// Estimation result; timing is wall-clock and therefore optional.
inline json result_json(const LseResult& r, bool with_timing = true) {
    json j;
    j["k_hat"] = r.k_hat;
    j["theta"] = r.theta;
    j["gamma"] = r.gamma;
    json al = json::array();
    for (const auto& a : r.alpha) al.push_back(to_json(a));
    j["alpha"] = std::move(al);
    j["beta"] = r.beta;
    j["zeta"] = r.zeta;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["backend"] = backend_name(r.backend);
    j["objective"] = r.objective_trace.empty() ? 0.0 : r.objective_trace.back();
    json blocks = json::array();
    for (Block b : r.trace_blocks) blocks.push_back(block_name(b));
    json trace = {{"block", std::move(blocks)}, {"objective", r.objective_trace}, {"active", r.trace_active}};
    j["trace"] = std::move(trace);
    j["warnings"] = r.warnings;
    if (with_timing)
        j["timing_seconds"] = {{"activation", r.times.activation},
                               {"zeta", r.times.zeta},
                               {"beta", r.times.beta},
                               {"refinement", r.times.refinement},
                               {"deactivation", r.times.deactivation}};
    return j;
}

}  // namespace superlse::io
