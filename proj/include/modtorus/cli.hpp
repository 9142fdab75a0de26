#pragma once

/**
 * @file cli.hpp
 * @brief Command implementations behind the `modtorus` executable.
 *
 * Each command takes a RunConfig and writes its report to the configured
 * output (or the given stream). The report JSON embeds the config, so a
 * report can be replayed with `modtorus replay`. Wall-clock timing is
 * only emitted with `--timing`, which keeps reports byte-identical across
 * runs.
 */

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "modtorus/arith.hpp"
#include "modtorus/bessel.hpp"
#include "modtorus/error.hpp"
#include "modtorus/expsum.hpp"
#include "modtorus/kernels.hpp"
#include "modtorus/parallel.hpp"
#include "modtorus/report_io.hpp"
#include "modtorus/stats.hpp"
#include "modtorus/torusgeo.hpp"

namespace modtorus::cli {

enum exit_code : int {
    exit_ok = 0,
    exit_usage = 2,
    exit_resource_limit = 3,
    exit_check_failure = 4,
    exit_io = 5,
};

class io_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string command;
    std::int64_t q = 0;
    std::string primes;              // "lo..hi"
    int count = 0;                   // 0 takes every prime in the range
    std::string spacing = "smallest";  // or "log"
    std::string radius;              // "0.05", "q^-0.75", "0.5*q^(-1/2)"
    int grid = 64;
    int resolution = 1024;
    double epsilon = 1e-6;
    std::uint64_t seed = 20201;
    std::uint64_t samples = 200000;
    unsigned threads = 0;            // resolved worker count, echoed in reports
    std::string output;              // empty writes to the caller's stream
    std::string format;              // csv | json | empty for the command default
    std::string method;              // variance method; empty for the command default
    std::string stat;                // sweep statistic
    std::string fit = "value";       // sweep column to fit against q
    std::optional<std::int64_t> m, n;
    bool all = false;
    bool check_weil = false;
    bool box = false;
    bool timing = false;
    std::int64_t a = 1;
    int max_mode = 2;
    std::int64_t index = 2;
    double delta = 0.05;
    int sign = 1;
    double bourgain_delta = 0.1;
    double threshold = 0.0;
    double center_x = 0.0, center_y = 0.0;
    std::int64_t table_cap = default_table_cap;
    double bessel_fault = 1.0;       // selfcheck fault injection: J1 is scaled by this factor
};

inline json to_json(const RunConfig& c) {
    return json{{"command", c.command},
                {"q", c.q},
                {"primes", c.primes},
                {"count", c.count},
                {"spacing", c.spacing},
                {"radius", c.radius},
                {"grid", c.grid},
                {"resolution", c.resolution},
                {"epsilon", c.epsilon},
                {"seed", c.seed},
                {"samples", c.samples},
                {"threads", c.threads},
                {"output", c.output},
                {"format", c.format},
                {"method", c.method},
                {"stat", c.stat},
                {"fit", c.fit},
                {"m", c.m ? json(*c.m) : json(nullptr)},
                {"n", c.n ? json(*c.n) : json(nullptr)},
                {"all", c.all},
                {"check_weil", c.check_weil},
                {"box", c.box},
                {"timing", c.timing},
                {"a", c.a},
                {"max_mode", c.max_mode},
                {"index", c.index},
                {"delta", c.delta},
                {"sign", c.sign},
                {"bourgain_delta", c.bourgain_delta},
                {"threshold", c.threshold},
                {"center", {c.center_x, c.center_y}},
                {"table_cap", c.table_cap},
                {"bessel_fault", c.bessel_fault}};
}

inline RunConfig config_from_json(const json& j) {
    RunConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("command", c.command);
    get("q", c.q);
    get("primes", c.primes);
    get("count", c.count);
    get("spacing", c.spacing);
    get("radius", c.radius);
    get("grid", c.grid);
    get("resolution", c.resolution);
    get("epsilon", c.epsilon);
    get("seed", c.seed);
    get("samples", c.samples);
    get("threads", c.threads);
    get("output", c.output);
    get("format", c.format);
    get("method", c.method);
    get("stat", c.stat);
    get("fit", c.fit);
    if (j.contains("m") && !j.at("m").is_null()) c.m = j.at("m").get<std::int64_t>();
    if (j.contains("n") && !j.at("n").is_null()) c.n = j.at("n").get<std::int64_t>();
    get("all", c.all);
    get("check_weil", c.check_weil);
    get("box", c.box);
    get("timing", c.timing);
    get("a", c.a);
    get("max_mode", c.max_mode);
    get("index", c.index);
    get("delta", c.delta);
    get("sign", c.sign);
    get("bourgain_delta", c.bourgain_delta);
    get("threshold", c.threshold);
    if (j.contains("center")) {
        c.center_x = j.at("center").at(0).get<double>();
        c.center_y = j.at("center").at(1).get<double>();
    }
    get("table_cap", c.table_cap);
    get("bessel_fault", c.bessel_fault);
    return c;
}

// -----------------------------------------------------------------------------
// Argument parsing helpers
// -----------------------------------------------------------------------------

namespace detail {

inline double parse_number(std::string_view s, const std::string& what) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    require(ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(v), errc::invalid_argument,
            "cannot parse " + what + " '" + std::string(s) + "'");
    return v;
}

/// "e", "(e)", "a/b" or "(a/b)" with optional signs.
inline double parse_exponent(std::string_view s) {
    if (s.size() >= 2 && s.front() == '(' && s.back() == ')') s = s.substr(1, s.size() - 2);
    if (const auto slash = s.find('/'); slash != std::string_view::npos) {
        const double num = parse_number(s.substr(0, slash), "exponent");
        const double den = parse_number(s.substr(slash + 1), "exponent");
        require(den != 0.0, errc::invalid_argument, "zero denominator in exponent");
        return num / den;
    }
    return parse_number(s, "exponent");
}

} // namespace detail

/// Evaluates a radius spec for modulus q: an absolute value such as
/// "0.05", or "q^e" / "c*q^e" with e a decimal or a fraction.
inline double parse_radius(const std::string& spec, std::int64_t q) {
    require(!spec.empty(), errc::invalid_argument, "missing --radius");
    std::string_view s = spec;
    const auto qpos = s.find('q');
    if (qpos == std::string_view::npos) return detail::parse_number(s, "radius");
    double coefficient = 1.0;
    if (qpos > 0) {
        std::string_view head = s.substr(0, qpos);
        require(head.back() == '*', errc::invalid_argument, "radius spec must look like c*q^e, got '" + spec + "'");
        coefficient = detail::parse_number(head.substr(0, head.size() - 1), "radius coefficient");
    }
    std::string_view tail = s.substr(qpos + 1);
    require(!tail.empty() && tail.front() == '^', errc::invalid_argument, "radius spec must look like q^e, got '" + spec + "'");
    require(q >= 1, errc::invalid_argument, "q-power radius needs a modulus");
    return coefficient * std::pow(static_cast<double>(q), detail::parse_exponent(tail.substr(1)));
}

inline std::pair<std::int64_t, std::int64_t> parse_prime_range(const std::string& range) {
    const auto dots = range.find("..");
    require(dots != std::string::npos, errc::invalid_argument, "prime range must look like lo..hi, got '" + range + "'");
    auto to_int = [&](std::string_view s) {
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        require(ec == std::errc{} && ptr == s.data() + s.size(), errc::invalid_argument, "bad prime range '" + range + "'");
        return v;
    };
    const std::string_view r = range;
    const auto lo = to_int(r.substr(0, dots));
    const auto hi = to_int(r.substr(dots + 2));
    require(lo >= 2 && hi >= lo, errc::invalid_argument, "prime range needs 2 <= lo <= hi");
    return {lo, hi};
}

/// Deterministic prime selection. "smallest" takes the `count` smallest
/// primes >= lo (all of them in range when count is 0); "log" takes the
/// first prime at or after each of `count` log-spaced targets in [lo, hi].
inline std::vector<std::int64_t> select_primes(const std::string& range, int count, const std::string& spacing) {
    const auto [lo, hi] = parse_prime_range(range);
    require(count >= 0, errc::invalid_argument, "--count must be >= 0");
    std::vector<std::int64_t> out;
    if (spacing == "smallest") {
        out = count == 0 ? primes_between(lo, hi) : primes_from(lo, static_cast<std::size_t>(count));
        require(out.empty() || out.back() <= hi, errc::invalid_argument,
                "fewer than " + std::to_string(count) + " primes in " + range);
    } else if (spacing == "log") {
        require(count >= 2, errc::invalid_argument, "log spacing needs --count >= 2");
        for (int i = 0; i < count; ++i) {
            const double t = static_cast<double>(lo) *
                             std::pow(static_cast<double>(hi) / static_cast<double>(lo), static_cast<double>(i) / (count - 1));
            std::int64_t p = primes_from(static_cast<std::int64_t>(std::ceil(t)), 1).front();
            if (p > hi) {
                p = hi;
                while (p >= lo && !is_prime(p)) --p;
                if (p < lo) continue;
            }
            if (out.empty() || out.back() != p) out.push_back(p);
        }
    } else {
        fail(errc::invalid_argument, "--spacing must be smallest or log, got '" + spacing + "'");
    }
    require(out.size() >= 3, errc::invalid_argument, "a sweep needs at least 3 primes");
    return out;
}

// -----------------------------------------------------------------------------
// Self-check
// -----------------------------------------------------------------------------

struct SelfCheckItem {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SelfCheckOptions {
    std::function<double(double)> j1 = [](double x) { return bessel_j1(x); };
    double parseval_epsilon = 1e-4;
};

inline std::vector<SelfCheckItem> run_selfcheck(const SelfCheckOptions& opt = {}) {
    std::vector<SelfCheckItem> items;
    auto detail_of = [](auto&&... parts) {
        std::ostringstream s;
        s << std::setprecision(6);
        (s << ... << parts);
        return s.str();
    };

    {
        const auto env = check_j1_envelope(opt.j1);
        items.push_back({"j1-envelope", env.violations == 0,
                         detail_of(env.points, " points, ", env.violations, " violations, worst ratio ", env.worst_ratio,
                                   " at x = ", env.worst_x)});
    }
    {
        bool ok = true;
        std::ostringstream s;
        s << std::setprecision(4);
        for (double R : {0.05, 0.1, 0.2, 0.3}) {
            const auto p = parseval_residual(R, opt.parseval_epsilon);
            ok = ok && p.residual < 2.0 * opt.parseval_epsilon;
            s << "R=" << R << ": " << p.residual << "; ";
        }
        items.push_back({"parseval", ok, s.str() + "epsilon " + detail_of(opt.parseval_epsilon)});
    }
    {
        double worst = 0.0;
        std::int64_t worst_q = 0;
        for (std::int64_t q = 1; q <= 200; ++q) {
            const Modulus mod = make_modulus(q);
            const auto table = kloosterman_table(mod);
            const auto units = unit_group(mod);
            const RootsOfUnity roots(q);
            for (std::int64_t m = 0; m < q; ++m) {
                for (std::int64_t n = 0; n < q; ++n) {
                    const double d = std::abs(table(m, n) - kloosterman(m, n, units, roots));
                    if (d > worst) {
                        worst = d;
                        worst_q = q;
                    }
                }
            }
        }
        items.push_back({"kloosterman-oracle", worst <= 1e-9, detail_of("q <= 200, max |table - direct| = ", worst, " (q = ", worst_q, ")")});
    }
    {
        std::int64_t worst = 0, worst_q = 0;
        for (std::int64_t q : primes_between(2, 300)) {
            const auto units = unit_group(make_modulus(q));
            for (residue c1 : units.units) {
                for (residue c2 : units.units) {
                    const auto c = pair_count(c1, c2, units);
                    if (c > worst) {
                        worst = c;
                        worst_q = q;
                    }
                }
            }
        }
        items.push_back({"pair-count", worst <= 2, detail_of("primes <= 300, max count ", worst, " (q = ", worst_q, ")")});
    }
    {
        std::size_t bad = 0;
        std::int64_t first_bad = 0;
        const auto primes = primes_between(53, 997);
        for (std::int64_t q : primes) {
            if (ball_count(generate_s_q(make_modulus(q)), corner_ball(q)) != 0) {
                if (bad++ == 0) first_bad = q;
            }
        }
        items.push_back({"corner-emptiness", bad == 0,
                         detail_of(primes.size(), " primes in [53, 997], ", bad, " non-empty",
                                   bad ? " (first q = " + std::to_string(first_bad) + ")" : "")});
    }
    return items;
}

// -----------------------------------------------------------------------------
// Commands
// -----------------------------------------------------------------------------

namespace detail {

struct Output {
    std::ofstream file;
    std::ostream* stream;

    Output(const std::string& path, std::ostream& fallback) : stream(&fallback) {
        if (path.empty() || path == "-") return;
        file.open(path, std::ios::binary | std::ios::trunc);
        if (!file) throw io_error("cannot open output file '" + path + "'");
        stream = &file;
    }

    std::ostream& operator*() { return *stream; }

    void finish() {
        stream->flush();
        if (!*stream) throw io_error("write failed");
    }
};

inline json envelope(const RunConfig& cfg, json result, json certified_error, double wall) {
    return json{{"config", to_json(cfg)},
                {"result", std::move(result)},
                {"certified_error", std::move(certified_error)},
                {"timing", cfg.timing ? json{{"wall_seconds", wall}} : json(nullptr)}};
}

inline std::string format_of(const RunConfig& cfg, const char* fallback) {
    const std::string f = cfg.format.empty() ? fallback : cfg.format;
    require(f == "csv" || f == "json", errc::invalid_argument, "--format must be csv or json, got '" + f + "'");
    return f;
}

inline Modulus modulus_of(const RunConfig& cfg) {
    require(cfg.q >= 1, errc::invalid_argument, "--q must be a positive integer");
    return make_modulus(cfg.q);
}

inline void write_json(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

using clock = std::chrono::steady_clock;
using modtorus::detail::seconds_since;

} // namespace detail

inline int cmd_gen(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto t0 = detail::clock::now();
    const Modulus mod = detail::modulus_of(cfg);
    const auto ps = generate_s_q(mod);
    const auto format = detail::format_of(cfg, "csv");
    detail::Output o(cfg.output, out);
    if (format == "csv") {
        write_csv(*o, ps);
    } else {
        json pts = json::array();
        for (const auto& p : ps.points()) pts.push_back(modtorus::to_json(p));
        detail::write_json(*o, detail::envelope(cfg, {{"q", mod.value()}, {"phi", mod.phi()}, {"points", pts}}, nullptr,
                                                detail::seconds_since(t0)));
    }
    o.finish();
    err << "phi(" << mod.value() << ") = " << mod.phi() << '\n';
    return exit_ok;
}

struct WeilCheck {
    double max_ratio = 0.0;
    std::int64_t argmax_m = 0, argmax_n = 0;
    bool cubefree = false;
    bool passed() const { return !cubefree || max_ratio <= 1.0 + 1e-6; }
};

inline WeilCheck weil_check(const KloostermanTable& table) {
    const Modulus& mod = table.modulus();
    WeilCheck w;
    w.cubefree = mod.is_cubefree();
    for (std::int64_t m = 0; m < mod.value(); ++m) {
        for (std::int64_t n = 0; n < mod.value(); ++n) {
            const double r = std::abs(table(m, n)) / weil_rhs(m, n, mod);
            if (r > w.max_ratio) {
                w.max_ratio = r;
                w.argmax_m = m;
                w.argmax_n = n;
            }
        }
    }
    return w;
}

inline int cmd_kloosterman(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto t0 = detail::clock::now();
    const Modulus mod = detail::modulus_of(cfg);
    const std::int64_t q = mod.value();
    const auto format = detail::format_of(cfg, "csv");
    require(cfg.all || cfg.check_weil || (cfg.m && cfg.n), errc::invalid_argument,
            "kloosterman needs --m and --n, --all or --check-weil");
    detail::Output o(cfg.output, out);

    if (!cfg.all && !cfg.check_weil) {
        const double v = kloosterman(*cfg.m, *cfg.n, mod);
        if (format == "csv") {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.10f", v);
            *o << buf << '\n';
        } else {
            detail::write_json(*o, detail::envelope(cfg,
                                                    {{"q", q}, {"m", *cfg.m}, {"n", *cfg.n}, {"value", v},
                                                     {"weil_rhs", weil_rhs(*cfg.m, *cfg.n, mod)}},
                                                    nullptr, detail::seconds_since(t0)));
        }
        o.finish();
        return exit_ok;
    }

    const auto table = kloosterman_table(mod, cfg.table_cap);
    std::optional<WeilCheck> check;
    if (cfg.check_weil) check = weil_check(table);

    if (format == "csv") {
        if (cfg.all) {
            *o << "m,n,S\n";
            for (std::int64_t m = 0; m < q; ++m)
                for (std::int64_t n = 0; n < q; ++n) *o << m << ',' << n << ',' << format_double(table(m, n)) << '\n';
        }
    } else {
        json result{{"q", q}, {"phi", mod.phi()}};
        if (cfg.all) result["values"] = table.values();
        if (check) {
            result["weil_check"] = {{"max_ratio", check->max_ratio},
                                    {"argmax", {check->argmax_m, check->argmax_n}},
                                    {"cubefree", check->cubefree},
                                    {"asserted", check->cubefree},
                                    {"passed", check->passed()}};
        }
        detail::write_json(*o, detail::envelope(cfg, std::move(result), nullptr, detail::seconds_since(t0)));
    }
    o.finish();
    if (check) {
        err << "weil check q=" << q << ": max |S|/rhs = " << std::setprecision(10) << check->max_ratio << " at (m,n) = ("
            << check->argmax_m << "," << check->argmax_n << "); "
            << (check->cubefree ? (check->passed() ? "PASS" : "FAIL") : "not asserted (q is not cubefree)") << '\n';
        if (!check->passed()) return exit_check_failure;
    }
    return exit_ok;
}

inline int cmd_variance(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto t0 = detail::clock::now();
    const Modulus mod = detail::modulus_of(cfg);
    const double R = parse_radius(cfg.radius, mod.value());
    const std::string method = cfg.method.empty() ? "all" : cfg.method;
    require(method == "all" || method == "geometric" || method == "spectral" || method == "montecarlo",
            errc::invalid_argument, "--method must be geometric, spectral, montecarlo or all");
    const auto format = detail::format_of(cfg, "json");

    std::vector<VarianceReport> reports;
    const bool all = method == "all";
    std::optional<PointSet> ps;
    auto points = [&]() -> const PointSet& {
        if (!ps) ps = generate_s_q(mod);
        return *ps;
    };
    if (method == "geometric" || (all && R < 0.25)) reports.push_back(variance_geometric(points(), R));
    if (method == "spectral" || all) reports.push_back(variance_spectral(mod, R, cfg.epsilon, SpectralWeights::full, cfg.table_cap));
    if (method == "montecarlo" || all) reports.push_back(variance_montecarlo(points(), R, cfg.samples, cfg.seed));

    json result = json::object();
    json errors = json::object();
    for (const auto& r : reports) {
        result[to_string(r.method)] = modtorus::to_json(r, cfg.timing);
        errors[to_string(r.method)] = r.certified_error;
    }
    bool agree = true;
    if (reports.size() > 1) {
        json deltas = json::array();
        for (std::size_t i = 0; i < reports.size(); ++i) {
            for (std::size_t j = i + 1; j < reports.size(); ++j) {
                const auto& a = reports[i];
                const auto& b = reports[j];
                const bool mc = a.method == VarianceMethod::montecarlo || b.method == VarianceMethod::montecarlo;
                // A Monte Carlo error is one standard error; compare at 3 sigma.
                const double allowed = (a.method == VarianceMethod::montecarlo ? 3.0 : 1.0) * a.certified_error +
                                       (b.method == VarianceMethod::montecarlo ? 3.0 : 1.0) * b.certified_error;
                const double delta = std::abs(a.value - b.value);
                const bool ok = delta <= allowed;
                if (!mc) agree = agree && ok;
                deltas.push_back({{"pair", std::string(to_string(a.method)) + "-" + to_string(b.method)},
                                  {"delta", delta},
                                  {"allowed", allowed},
                                  {"agree", ok}});
                err << to_string(a.method) << " vs " << to_string(b.method) << ": |delta| = " << std::setprecision(6) << delta
                    << ", allowed " << allowed << (ok ? "" : "  DISAGREE") << '\n';
            }
        }
        result["deltas"] = std::move(deltas);
    }

    detail::Output o(cfg.output, out);
    if (format == "json") {
        json cert = reports.size() == 1 ? json(reports.front().certified_error) : errors;
        detail::write_json(*o, detail::envelope(cfg, std::move(result), std::move(cert), detail::seconds_since(t0)));
    } else {
        *o << "method,q,n,R,value,certified_error,diagonal_part,offdiagonal_part,cutoff,samples,seed\n";
        for (const auto& r : reports) {
            *o << to_string(r.method) << ',' << r.q << ',' << r.n << ',' << format_double(r.R) << ',' << format_double(r.value)
               << ',' << format_double(r.certified_error) << ',' << format_double(r.diagonal_part) << ','
               << format_double(r.offdiagonal_part) << ',' << format_double(r.cutoff) << ',' << r.samples << ',' << r.seed
               << '\n';
        }
    }
    o.finish();
    return agree ? exit_ok : exit_check_failure;
}

inline int cmd_discrepancy(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const auto t0 = detail::clock::now();
    const Modulus mod = detail::modulus_of(cfg);
    const auto format = detail::format_of(cfg, "json");
    const auto ps = generate_s_q(mod);
    json result = modtorus::to_json(discrepancy_estimate(ps, cfg.grid));
    result["q"] = mod.value();
    if (cfg.box) result["box"] = modtorus::to_json(box_discrepancy_estimate(ps, cfg.grid));
    detail::Output o(cfg.output, out);
    if (format == "json") {
        detail::write_json(*o, detail::envelope(cfg, std::move(result), nullptr, detail::seconds_since(t0)));
    } else {
        write_object_csv(*o, flatten_object(result));
    }
    o.finish();
    return exit_ok;
}

inline int cmd_covering(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const auto t0 = detail::clock::now();
    const Modulus mod = detail::modulus_of(cfg);
    const auto format = detail::format_of(cfg, "json");
    const auto rep = covering_report(generate_s_q(mod), cfg.resolution, cfg.delta, cfg.sign);
    json result = modtorus::to_json(rep);
    detail::Output o(cfg.output, out);
    if (format == "json") {
        detail::write_json(*o, detail::envelope(cfg, std::move(result), nullptr, detail::seconds_since(t0)));
    } else {
        write_object_csv(*o, flatten_object(result));
    }
    o.finish();
    return exit_ok;
}

inline int cmd_exceptional(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const auto t0 = detail::clock::now();
    const Modulus mod = detail::modulus_of(cfg);
    const double R = parse_radius(cfg.radius, mod.value());
    const auto format = detail::format_of(cfg, "json");
    const auto measure = exceptional_set_measure(generate_s_q(mod), R, cfg.threshold, cfg.grid);
    json result{{"q", mod.value()}, {"R", R}, {"threshold", cfg.threshold}, {"grid", cfg.grid}, {"measure", modtorus::to_json(measure)}};
    detail::Output o(cfg.output, out);
    if (format == "json") {
        detail::write_json(*o, detail::envelope(cfg, std::move(result), measure.width(), detail::seconds_since(t0)));
    } else {
        write_object_csv(*o, flatten_object(result));
    }
    o.finish();
    return exit_ok;
}

inline int cmd_ball(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const auto t0 = detail::clock::now();
    const Modulus mod = detail::modulus_of(cfg);
    const double R = parse_radius(cfg.radius, mod.value());
    const auto format = detail::format_of(cfg, "json");
    const BallSpec ball{{cfg.center_x, cfg.center_y}, R};
    const auto ps = generate_s_q(mod);
    const auto count = ball_count(ps, ball);
    const double mu = static_cast<double>(count) / static_cast<double>(ps.size());
    json result{{"q", mod.value()},           {"center", {cfg.center_x, cfg.center_y}},
                {"R", R},                     {"count", count},
                {"mu", mu},                   {"volume", ball_volume(R)},
                {"deviation", std::abs(mu - ball_volume(R))}};
    detail::Output o(cfg.output, out);
    if (format == "json") {
        detail::write_json(*o, detail::envelope(cfg, std::move(result), 0.0, detail::seconds_since(t0)));
    } else {
        write_object_csv(*o, flatten_object(result));
    }
    o.finish();
    return exit_ok;
}

inline int cmd_sparse(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto t0 = detail::clock::now();
    const Modulus mod = detail::modulus_of(cfg);
    const auto format = detail::format_of(cfg, "json");
    const auto coset = subgroup_by_index(mod, cfg.index, cfg.a);
    const auto rep = sparse_report(coset, cfg.max_mode, cfg.bourgain_delta);
    detail::Output o(cfg.output, out);
    if (format == "json") {
        json result = modtorus::to_json(rep);
        result["index"] = cfg.index;
        detail::write_json(*o, detail::envelope(cfg, std::move(result), nullptr, detail::seconds_since(t0)));
    } else {
        *o << "m,n,abs_value,bound\n";
        for (const auto& m : rep.modes)
            *o << m.m << ',' << m.n << ',' << format_double(m.abs_value) << ',' << format_double(m.bound) << '\n';
    }
    o.finish();
    err << "sparse q=" << rep.q << " #H=" << rep.subgroup_order << ": max |sum| / #H = " << std::setprecision(8) << rep.max_abs
        << ", bound " << rep.bound << (rep.within_bound ? "" : "  EXCEEDED") << '\n';
    return (mod.is_cubefree() && !rep.within_bound) ? exit_check_failure : exit_ok;
}

inline int cmd_mixing(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto t0 = detail::clock::now();
    const Modulus mod = detail::modulus_of(cfg);
    const auto format = detail::format_of(cfg, "json");
    const auto rep = mixing_report(mod, cfg.a, cfg.max_mode);
    bool within = true;
    json flagged = json::array();
    for (const auto& m : rep.modes) {
        if (m.degenerate) flagged.push_back({{"mode", {m.mode.m, m.mode.n, m.mode.mp, m.mode.np}}, {"value", m.value}});
        else if (std::abs(m.value) > m.bound + 1e-9) within = false;
    }
    detail::Output o(cfg.output, out);
    if (format == "json") {
        json result = modtorus::to_json(rep);
        result["flagged"] = std::move(flagged);
        result["within_bound"] = within;
        detail::write_json(*o, detail::envelope(cfg, std::move(result), nullptr, detail::seconds_since(t0)));
    } else {
        *o << "m,n,mp,np,value,bound,degenerate\n";
        for (const auto& m : rep.modes)
            *o << m.mode.m << ',' << m.mode.n << ',' << m.mode.mp << ',' << m.mode.np << ',' << format_double(m.value) << ','
               << format_double(m.bound) << ',' << (m.degenerate ? 1 : 0) << '\n';
    }
    o.finish();
    err << "mixing q=" << rep.q << " a=" << rep.a << ": " << rep.degenerate_count << " degenerate modes, max |coefficient| = "
        << std::setprecision(8) << rep.max_abs_nondegenerate << " elsewhere\n";
    return (mod.is_cubefree() && !within) ? exit_check_failure : exit_ok;
}

/// One sweep row for the statistic named in cfg.stat.
inline SweepRow sweep_row(const RunConfig& cfg, std::int64_t q) {
    const Modulus mod = make_modulus(q);
    SweepRow row;
    row.q = q;
    const std::string& stat = cfg.stat;
    if (stat == "variance") {
        const double R = parse_radius(cfg.radius, q);
        const std::string method = cfg.method.empty() ? "geometric" : cfg.method;
        VarianceReport rep;
        if (method == "geometric") {
            rep = variance_geometric(generate_s_q(mod), R);
        } else if (method == "spectral") {
            rep = variance_spectral(mod, R, cfg.epsilon, SpectralWeights::full, cfg.table_cap);
        } else if (method == "montecarlo") {
            rep = variance_montecarlo(generate_s_q(mod), R, cfg.samples, cfg.seed);
        } else {
            fail(errc::invalid_argument, "sweep variance needs --method geometric, spectral or montecarlo");
        }
        const double ratio = rep.value * static_cast<double>(mod.phi()) / ball_volume(R);
        row.value = rep.value;
        row.auxiliary = {{"R", R},
                         {"certified_error", rep.certified_error},
                         {"ratio", ratio},
                         {"deviation", std::abs(ratio - 1.0)}};
    } else if (stat == "discrepancy") {
        const auto rep = discrepancy_estimate(generate_s_q(mod), cfg.grid);
        row.value = rep.estimate;
        row.auxiliary = {{"witness_x1", rep.witness.center.x1},
                         {"witness_x2", rep.witness.center.x2},
                         {"witness_R", rep.witness.R}};
    } else if (stat == "covering") {
        const auto rep = covering_report(generate_s_q(mod), cfg.resolution, cfg.delta, cfg.sign);
        const double nan = std::nan("");
        const double mid = (rep.avg_exponent_hi && rep.avg_exponent_lo) ? 0.5 * (*rep.avg_exponent_hi + *rep.avg_exponent_lo) : nan;
        row.value = rep.radius.hi;
        row.auxiliary = {{"radius_lo", rep.radius.lo},
                         {"exponent_hi", rep.exponent_hi.value_or(nan)},
                         {"exponent_lo", rep.exponent_lo.value_or(nan)},
                         {"avg_radius_lo", rep.average.radius.lo},
                         {"avg_radius_hi", rep.average.radius.hi},
                         {"avg_exponent_hi", rep.avg_exponent_hi.value_or(nan)},
                         {"avg_exponent_lo", rep.avg_exponent_lo.value_or(nan)},
                         {"avg_exponent_mid", mid},
                         {"avg_exponent_deviation", std::abs(mid - 1.0)}};
    } else if (stat == "ball") {
        const double R = parse_radius(cfg.radius, q);
        const auto ps = generate_s_q(mod);
        const double mu = mu_ball(ps, {{cfg.center_x, cfg.center_y}, R});
        row.value = std::abs(mu - ball_volume(R));
        row.auxiliary = {{"R", R}, {"mu", mu}, {"volume", ball_volume(R)}};
    } else if (stat == "exceptional") {
        const double R = parse_radius(cfg.radius, q);
        const auto m = exceptional_set_measure(generate_s_q(mod), R, cfg.threshold, cfg.grid);
        row.value = m.hi;
        row.auxiliary = {{"R", R}, {"measure_lo", m.lo}};
    } else {
        fail(errc::invalid_argument, "--stat must be variance, discrepancy, covering, ball or exceptional, got '" + stat + "'");
    }
    return row;
}

/// Log-log fit of the chosen column against q; empty when some value is
/// not a positive finite number.
inline std::optional<ExponentFit> fit_column(const std::vector<SweepRow>& rows, const std::string& column) {
    std::vector<std::pair<double, double>> xy;
    for (const auto& r : rows) {
        double v = std::nan("");
        if (column == "value") {
            v = r.value;
        } else {
            for (const auto& [k, x] : r.auxiliary)
                if (k == column) v = x;
        }
        if (!(std::isfinite(v) && v > 0.0)) return std::nullopt;
        xy.emplace_back(static_cast<double>(r.q), v);
    }
    return exponent_fit(xy);
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto t0 = detail::clock::now();
    const auto format = detail::format_of(cfg, "csv");
    require(!cfg.stat.empty(), errc::invalid_argument, "sweep needs --stat");
    const auto primes = select_primes(cfg.primes, cfg.count, cfg.spacing);
    SweepResult s;
    s.statistic = cfg.stat;
    // Each statistic is parallel inside; primes run in ascending order.
    for (std::int64_t q : primes) s.rows.push_back(sweep_row(cfg, q));
    if (cfg.fit != "value" && !s.rows.empty()) {
        bool known = false;
        for (const auto& [k, v] : s.rows.front().auxiliary) known = known || k == cfg.fit;
        require(known, errc::invalid_argument, "--fit names no column of the " + cfg.stat + " sweep: '" + cfg.fit + "'");
    }
    s.fit = fit_column(s.rows, cfg.fit);

    detail::Output o(cfg.output, out);
    if (format == "csv") {
        write_sweep_csv(*o, s);
    } else {
        json result = modtorus::to_json(s);
        result["fit_column"] = cfg.fit;
        detail::write_json(*o, detail::envelope(cfg, std::move(result), nullptr, detail::seconds_since(t0)));
    }
    o.finish();
    if (s.fit) {
        err << "fit log(" << cfg.fit << ") ~ " << std::setprecision(6) << s.fit->slope << " log(q) + " << s.fit->intercept
            << "  (residual s.e. " << s.fit->stderr_residual << ", " << s.fit->rows << " primes)\n";
    } else {
        err << "fit skipped: column '" << cfg.fit << "' has non-positive values\n";
    }
    return exit_ok;
}

inline int cmd_selfcheck(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const auto t0 = detail::clock::now();
    SelfCheckOptions opt;
    if (cfg.bessel_fault != 1.0) {
        const double f = cfg.bessel_fault;
        opt.j1 = [f](double x) { return f * bessel_j1(x); };
    }
    const auto items = run_selfcheck(opt);
    bool ok = true;
    for (const auto& i : items) ok = ok && i.passed;
    const auto format = detail::format_of(cfg, "csv");
    detail::Output o(cfg.output, out);
    if (format == "json") {
        json checks = json::array();
        for (const auto& i : items) checks.push_back({{"name", i.name}, {"passed", i.passed}, {"detail", i.detail}});
        detail::write_json(*o, detail::envelope(cfg, {{"checks", checks}, {"passed", ok}}, nullptr, detail::seconds_since(t0)));
    } else {
        for (const auto& i : items) *o << (i.passed ? "PASS " : "FAIL ") << i.name << ": " << i.detail << '\n';
        *o << (ok ? "selfcheck: all checks passed" : "selfcheck: FAILED") << '\n';
    }
    o.finish();
    return ok ? exit_ok : exit_check_failure;
}

/// Dispatches cfg.command; library errors become exit codes with a message
/// on `err`.
inline int run(RunConfig cfg, std::ostream& out, std::ostream& err) {
    using handler = int (*)(const RunConfig&, std::ostream&, std::ostream&);
    static const std::map<std::string, handler> commands{
        {"gen", cmd_gen},           {"kloosterman", cmd_kloosterman}, {"variance", cmd_variance},
        {"discrepancy", cmd_discrepancy}, {"covering", cmd_covering},  {"exceptional", cmd_exceptional},
        {"ball", cmd_ball},         {"sparse", cmd_sparse},           {"mixing", cmd_mixing},
        {"sweep", cmd_sweep},       {"selfcheck", cmd_selfcheck}};
    try {
        const auto it = commands.find(cfg.command);
        require(it != commands.end(), errc::invalid_argument, "unknown command '" + cfg.command + "'");
        if (cfg.threads > 0) set_thread_count(cfg.threads);
        cfg.threads = thread_count();
        return it->second(cfg, out, err);
    } catch (const io_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_io;
    } catch (const error& e) {
        err << "error: " << e.what() << '\n';
        return e.code() == errc::resource_limit ? exit_resource_limit : exit_usage;
    }
}

} // namespace modtorus::cli
