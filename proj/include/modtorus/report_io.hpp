#pragma once

/**
 * @file report_io.hpp
 * @brief JSON and CSV encodings of the report records.
 *
 * Floating-point values are written with 17 significant digits so that a
 * report read back reproduces the exact doubles. Undefined quantities
 * (an exponent with pi R^2 >= 1, say) are written as null.
 */

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "modtorus/expsum.hpp"
#include "modtorus/kernels.hpp"
#include "modtorus/stats.hpp"
#include "modtorus/torusgeo.hpp"

namespace modtorus {

using json = nlohmann::ordered_json;

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json number_or_null(const std::optional<double>& v) { return v ? number_or_null(*v) : json(nullptr); }

inline json to_json(const TorusPoint& p) { return json::array({p.x1, p.x2}); }

inline json to_json(const Interval& i) { return json{{"lo", i.lo}, {"hi", i.hi}}; }

inline json to_json(const VarianceReport& r, bool timing = false) {
    json j{{"label", r.label},
           {"q", r.q},
           {"n", r.n},
           {"R", r.R},
           {"method", to_string(r.method)},
           {"value", r.value},
           {"certified_error", r.certified_error},
           {"diagonal_part", r.diagonal_part},
           {"offdiagonal_part", r.offdiagonal_part}};
    if (r.method == VarianceMethod::spectral) j["cutoff"] = r.cutoff;
    if (r.method == VarianceMethod::montecarlo) {
        j["samples"] = r.samples;
        j["seed"] = r.seed;
    }
    j["wall_time"] = timing ? json(r.wall_time) : json(nullptr);
    return j;
}

inline json to_json(const DiscrepancyReport& r) {
    return json{{"label", r.label},
                {"n", r.n},
                {"estimate", r.estimate},
                {"witness", {{"center", to_json(r.witness.center)}, {"R", r.witness.R}, {"mu", r.witness.mu}}},
                {"center_grid", r.center_grid},
                {"radii_per_center", r.radii_per_center}};
}

inline json to_json(const BoxDiscrepancyReport& r) {
    return json{{"estimate", r.estimate}, {"box", {{"x0", r.x0}, {"x1", r.x1}, {"y0", r.y0}, {"y1", r.y1}}}};
}

inline json to_json(const AverageCovering& a) {
    return json{{"delta", a.delta}, {"sign", a.sign}, {"radius", to_json(a.radius)}, {"degenerate", a.degenerate}};
}

inline json to_json(const CoveringReport& r) {
    return json{{"label", r.label},
                {"q", r.q},
                {"n", r.n},
                {"grid", r.grid},
                {"radius", to_json(r.radius)},
                {"exponent_hi", number_or_null(r.exponent_hi)},
                {"exponent_lo", number_or_null(r.exponent_lo)},
                {"average", to_json(r.average)},
                {"avg_exponent_hi", number_or_null(r.avg_exponent_hi)},
                {"avg_exponent_lo", number_or_null(r.avg_exponent_lo)}};
}

inline json to_json(const ExponentFit& f) {
    return json{{"slope", f.slope}, {"intercept", f.intercept}, {"stderr", f.stderr_residual}, {"rows", f.rows}};
}

inline json to_json(const SweepResult& s) {
    json rows = json::array();
    for (const auto& r : s.rows) {
        json row{{"q", r.q}, {"value", r.value}};
        for (const auto& [k, v] : r.auxiliary) row[k] = number_or_null(v);
        rows.push_back(std::move(row));
    }
    return json{{"statistic", s.statistic}, {"rows", std::move(rows)}, {"fit", s.fit ? to_json(*s.fit) : json(nullptr)}};
}

inline json to_json(const BourgainConditionReport& b) {
    return json{{"q", b.q},
                {"subgroup_order", b.subgroup_order},
                {"k1", b.k1},
                {"k2", b.k2},
                {"gcd_k1", b.gcd_k1},
                {"gcd_k2", b.gcd_k2},
                {"gcd_difference", b.gcd_diff},
                {"expected_gcd", b.expected_gcd},
                {"difference_bound", b.diff_bound},
                {"delta", b.delta},
                {"gcd_conditions", b.gcd_conditions},
                {"size_condition", b.size_condition},
                {"passed", b.passed()}};
}

inline json to_json(const SparseReport& r) {
    json modes = json::array();
    for (const auto& m : r.modes) {
        modes.push_back({{"m", m.m}, {"n", m.n}, {"abs_value", m.abs_value}, {"bound", m.bound}});
    }
    return json{{"q", r.q},
                {"representative", r.representative},
                {"subgroup_order", r.subgroup_order},
                {"max_mode", r.max_mode},
                {"max_abs", r.max_abs},
                {"argmax", {r.argmax_m, r.argmax_n}},
                {"bound", r.bound},
                {"within_bound", r.within_bound},
                {"bourgain", r.bourgain ? to_json(*r.bourgain) : json(nullptr)},
                {"modes", std::move(modes)}};
}

inline json to_json(const MixingReport& r) {
    json modes = json::array();
    for (const auto& m : r.modes) {
        modes.push_back({{"mode", {m.mode.m, m.mode.n, m.mode.mp, m.mode.np}},
                         {"value", m.value},
                         {"bound", m.bound},
                         {"degenerate", m.degenerate}});
    }
    return json{{"q", r.q},
                {"a", r.a},
                {"max_mode", r.max_mode},
                {"max_abs_nondegenerate", r.max_abs_nondegenerate},
                {"degenerate_count", r.degenerate_count},
                {"modes", std::move(modes)}};
}

inline json to_json(const ParsevalResult& p) {
    return json{{"R", p.R},           {"epsilon", p.epsilon},       {"target", p.target},
                {"partial_sum", p.partial_sum}, {"T", p.T},        {"tail_bound", p.tail_bound},
                {"residual", p.residual}, {"early_exit", p.early_exit}};
}

// -----------------------------------------------------------------------------
// CSV
// -----------------------------------------------------------------------------

inline std::string csv_field(const json& v) {
    if (v.is_null()) return "";
    if (v.is_number_float()) return format_double(v.get<double>());
    std::string s = v.is_string() ? v.get<std::string>() : v.dump();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
    return quoted + "\"";
}

/// Header `q,value,<auxiliary...>` followed by one row per prime.
inline void write_sweep_csv(std::ostream& out, const SweepResult& s) {
    out << "q,value";
    if (!s.rows.empty()) {
        for (const auto& [k, v] : s.rows.front().auxiliary) out << ',' << k;
    }
    out << '\n';
    for (const auto& r : s.rows) {
        out << r.q << ',' << format_double(r.value);
        for (const auto& [k, v] : r.auxiliary) out << ',' << csv_field(number_or_null(v));
        out << '\n';
    }
}

/// A flat object written as a two-line CSV (header, values).
inline void write_object_csv(std::ostream& out, const json& flat) {
    bool first = true;
    for (const auto& [k, v] : flat.items()) {
        out << (first ? "" : ",") << k;
        first = false;
    }
    out << '\n';
    first = true;
    for (const auto& [k, v] : flat.items()) {
        out << (first ? "" : ",") << csv_field(v);
        first = false;
    }
    out << '\n';
}

/// Flattens nested objects and arrays with dotted keys ("center.0").
inline json flatten_object(const json& j, const std::string& prefix = "") {
    json out = json::object();
    for (const auto& [k, v] : j.items()) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (v.is_structured()) {
            const json inner = flatten_object(v, key);
            for (const auto& [k2, v2] : inner.items()) out[k2] = v2;
        } else {
            out[key] = v;
        }
    }
    return out;
}

} // namespace modtorus
