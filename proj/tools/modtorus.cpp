// modtorus: command-line front end. Run `modtorus --help` for the command list.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "modtorus/cli.hpp"

namespace {

using modtorus::cli::RunConfig;

void add_q(CLI::App* sub, RunConfig& cfg) { sub->add_option("--q", cfg.q, "modulus q >= 1")->required(); }

void add_radius(CLI::App* sub, RunConfig& cfg, bool required = true) {
    auto* opt = sub->add_option("--radius", cfg.radius, "ball radius: absolute (0.05) or a q-power (q^-0.75, 0.5*q^(-1/2))");
    if (required) opt->required();
}

void add_center(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--cx", cfg.center_x, "ball center, first coordinate");
    sub->add_option("--cy", cfg.center_y, "ball center, second coordinate");
}

} // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    CLI::App app{"Equidistribution experiments for the modular hyperbola on the torus"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--threads", cfg.threads, "worker threads (MODTORUS_THREADS overrides; results do not depend on it)");
    app.add_option("--output,-o", cfg.output, "output file (default: stdout)");
    app.add_option("--format", cfg.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_flag("--timing", cfg.timing, "include wall-clock times in the report");

    auto* gen = app.add_subcommand("gen", "write the points (d/q, dbar/q) as CSV");
    add_q(gen, cfg);

    auto* kl = app.add_subcommand("kloosterman", "Kloosterman sums S(m,n;q)");
    add_q(kl, cfg);
    std::int64_t m = 0, n = 0;
    auto* m_opt = kl->add_option("--m", m, "first frequency");
    auto* n_opt = kl->add_option("--n", n, "second frequency");
    m_opt->needs(n_opt);
    n_opt->needs(m_opt);
    kl->add_flag("--all", cfg.all, "full table as CSV with columns m,n,S");
    kl->add_flag("--check-weil", cfg.check_weil, "report max |S| / tau(q) sqrt(gcd(m,n,q) q); fails for cubefree q above 1 + 1e-6");
    kl->add_option("--table-cap", cfg.table_cap, "largest q for the batch table");

    auto* var = app.add_subcommand("variance", "variance of ball counts over centers");
    add_q(var, cfg);
    add_radius(var, cfg);
    var->add_option("--method", cfg.method, "geometric, spectral, montecarlo or all (default)")
        ->check(CLI::IsMember({"geometric", "spectral", "montecarlo", "all"}));
    var->add_option("--epsilon", cfg.epsilon, "spectral truncation tolerance");
    var->add_option("--samples", cfg.samples, "Monte Carlo centers");
    var->add_option("--seed", cfg.seed, "Monte Carlo seed");
    var->add_option("--table-cap", cfg.table_cap, "largest q for the batch table");

    auto* disc = app.add_subcommand("discrepancy", "lower bound for the ball discrepancy");
    add_q(disc, cfg);
    disc->add_option("--grid", cfg.grid, "centers on a G x G grid");
    disc->add_flag("--box", cfg.box, "also report the axis-parallel box discrepancy");

    auto* cov = app.add_subcommand("covering", "covering radius and average covering radius");
    add_q(cov, cfg);
    cov->add_option("--resolution", cfg.resolution, "cells per side of the certification grid");
    cov->add_option("--delta", cfg.delta, "average covering exponent delta");
    cov->add_option("--sign", cfg.sign, "+1 or -1: uncovered measure <= R^(sign delta)")->check(CLI::IsMember({1, -1}));

    auto* exc = app.add_subcommand("exceptional", "measure of centers with large ball-count deviation");
    add_q(exc, cfg);
    add_radius(exc, cfg);
    exc->add_option("--threshold", cfg.threshold, "deviation threshold")->required();
    exc->add_option("--grid", cfg.grid, "cells per side");

    auto* ball = app.add_subcommand("ball", "proportion of points in one ball");
    add_q(ball, cfg);
    add_radius(ball, cfg);
    add_center(ball, cfg);

    auto* sparse = app.add_subcommand("sparse", "Weyl sums over a coset of a subgroup of units");
    add_q(sparse, cfg);
    sparse->add_option("--index", cfg.index, "subgroup index in the unit group");
    sparse->add_option("--a", cfg.a, "coset representative");
    sparse->add_option("--max-mode", cfg.max_mode, "largest |m|, |n|");
    sparse->add_option("--bourgain-delta", cfg.bourgain_delta, "delta in the size condition #H >= q^delta");

    auto* mix = app.add_subcommand("mixing", "Fourier coefficients of the pair (x, a-translate)");
    add_q(mix, cfg);
    mix->add_option("--a", cfg.a, "unit a")->required();
    mix->add_option("--max-mode", cfg.max_mode, "largest mode component");

    auto* sweep = app.add_subcommand("sweep", "run a statistic over a range of primes with a log-log fit");
    sweep->add_option("--stat", cfg.stat, "variance, discrepancy, covering, ball or exceptional")->required();
    sweep->add_option("--primes", cfg.primes, "prime range lo..hi")->required();
    sweep->add_option("--count", cfg.count, "number of primes (0: all in range)");
    sweep->add_option("--spacing", cfg.spacing, "smallest (k smallest primes >= lo) or log")
        ->check(CLI::IsMember({"smallest", "log"}));
    add_radius(sweep, cfg, false);
    add_center(sweep, cfg);
    sweep->add_option("--method", cfg.method, "variance method (default geometric)");
    sweep->add_option("--grid", cfg.grid, "discrepancy / exceptional grid");
    sweep->add_option("--resolution", cfg.resolution, "covering grid");
    sweep->add_option("--delta", cfg.delta, "average covering delta");
    sweep->add_option("--sign", cfg.sign, "average covering sign")->check(CLI::IsMember({1, -1}));
    sweep->add_option("--threshold", cfg.threshold, "exceptional-set threshold");
    sweep->add_option("--epsilon", cfg.epsilon, "spectral truncation tolerance");
    sweep->add_option("--samples", cfg.samples, "Monte Carlo centers");
    sweep->add_option("--seed", cfg.seed, "Monte Carlo seed");
    sweep->add_option("--fit", cfg.fit, "column fitted against q on log-log axes");

    auto* self = app.add_subcommand("selfcheck", "built-in consistency checks");
    self->add_option("--bessel-fault", cfg.bessel_fault, "scale J1 by this factor (fault injection)")->group("");

    auto* replay = app.add_subcommand("replay", "re-run the config embedded in a JSON report");
    std::string replay_path;
    std::string replay_output;
    replay->add_option("report", replay_path, "report or config JSON file")->required();
    replay->add_option("--to", replay_output, "write here instead of the recorded output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : modtorus::cli::exit_usage;
    }

    if (replay->parsed()) {
        std::ifstream in(replay_path);
        if (!in) {
            std::cerr << "error: cannot open '" << replay_path << "'\n";
            return modtorus::cli::exit_io;
        }
        modtorus::json j;
        try {
            j = modtorus::json::parse(in);
        } catch (const std::exception& e) {
            std::cerr << "error: " << replay_path << ": " << e.what() << '\n';
            return modtorus::cli::exit_io;
        }
        RunConfig recorded = modtorus::cli::config_from_json(j.contains("config") ? j.at("config") : j);
        if (replay->count("--to")) recorded.output = replay_output;
        return modtorus::cli::run(recorded, std::cout, std::cerr);
    }

    cfg.command = app.get_subcommands().front()->get_name();
    if (m_opt->count()) {
        cfg.m = m;
        cfg.n = n;
    }
    return modtorus::cli::run(cfg, std::cout, std::cerr);
}
