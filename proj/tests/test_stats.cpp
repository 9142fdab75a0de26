#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "modtorus/stats.hpp"

using namespace modtorus;

namespace {

constexpr double pi = std::numbers::pi;

// Midpoint rule for the variance integral on an F x F grid of centers.
double variance_on_grid(const PointSet& ps, double R, int F) {
    const double vol = ball_volume(R);
    long double acc = 0.0L;
    for (int i = 0; i < F; ++i)
        for (int j = 0; j < F; ++j) {
            const double mu = mu_ball(ps, {{(i + 0.5) / F, (j + 0.5) / F}, R});
            acc += static_cast<long double>((mu - vol) * (mu - vol));
        }
    return static_cast<double>(acc / (static_cast<long double>(F) * F));
}

std::complex<long double> direct_coset_sum(const SubgroupCoset& c, std::int64_t m, std::int64_t n) {
    const std::int64_t q = c.modulus.value();
    std::complex<long double> s = 0.0L;
    for (residue d : c.elements) {
        const residue dbar = mod_inverse(d, c.modulus);
        const auto k = static_cast<long double>(canonical(m * d + n * dbar, q));
        s += std::polar(1.0L, 2.0L * std::numbers::pi_v<long double> * k / q);
    }
    return s;
}

} // namespace

TEST(Variance, GeometricMatchesGridIntegral) {
    for (auto [q, R] : {std::pair<std::int64_t, double>{13, 0.1}, {29, 0.07}, {10, 0.2}}) {
        const auto ps = generate_s_q(make_modulus(q));
        const auto g = variance_geometric(ps, R);
        const double grid = variance_on_grid(ps, R, 1600);
        EXPECT_NEAR(g.value, grid, 2e-3 * g.value) << q << " " << R;
        EXPECT_NEAR(g.diagonal_part, ball_volume(R) / static_cast<double>(ps.size()), 1e-18);
    }
}

TEST(Variance, GeometricMatchesSpectral) {
    const std::vector<std::pair<std::int64_t, double>> cases{
        {101, 0.02}, {101, 0.05}, {101, 0.1}, {211, 0.05}, {211, 0.2}, {331, 0.03}, {91, 0.02}, {91, 0.05}, {1009, 0.01}};
    for (auto [q, R] : cases) {
        const Modulus mod = make_modulus(q);
        const auto g = variance_geometric(generate_s_q(mod), R);
        const auto s = variance_spectral(mod, R, 1e-6);
        EXPECT_LE(std::abs(g.value - s.value), g.certified_error + s.certified_error) << q << " " << R;
        EXPECT_LT(s.certified_error, 1e-6);
        EXPECT_EQ(s.q, q);
        EXPECT_EQ(g.q, q);
    }
}

TEST(Variance, MonteCarloWithinStandardErrors) {
    for (std::int64_t q : {53, 101}) {
        const auto ps = generate_s_q(make_modulus(q));
        for (double R : {0.05, 0.12}) {
            const auto g = variance_geometric(ps, R);
            const auto mc = variance_montecarlo(ps, R, 100000, 20201);
            EXPECT_NEAR(mc.value, g.value, 4.0 * mc.certified_error) << q << " " << R;
            EXPECT_GT(mc.certified_error, 0.0);
            EXPECT_EQ(mc.samples, 100000u);
        }
    }
    const auto ps = generate_s_q(make_modulus(101));
    EXPECT_EQ(variance_montecarlo(ps, 0.05, 5000, 7).value, variance_montecarlo(ps, 0.05, 5000, 7).value);
}

TEST(Variance, DiagonalOnlySpectralIsParseval) {
    for (std::int64_t q : {7, 101, 997}) {
        const Modulus mod = make_modulus(q);
        for (double R : {0.03, 0.1, 0.3}) {
            const double vol = ball_volume(R);
            const double eps = 1e-3 * vol / static_cast<double>(mod.phi());
            const auto s = variance_spectral(mod, R, eps, SpectralWeights::diagonal_only);
            EXPECT_LT(s.certified_error, eps);
            EXPECT_NEAR(s.value, (vol - vol * vol) / static_cast<double>(mod.phi()), s.certified_error) << q << " " << R;
        }
    }
}

TEST(Variance, RandomBaselineMatchesAverageOverRandomSets) {
    const double R = 0.1;
    const std::size_t n = 40;
    std::vector<double> v;
    for (std::uint64_t seed = 1; seed <= 400; ++seed) v.push_back(variance_geometric(random_pointset(n, seed), R).value);
    double mean = 0.0, m2 = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    for (double x : v) m2 += (x - mean) * (x - mean);
    const double se = std::sqrt(m2 / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    EXPECT_NEAR(mean, random_variance_baseline(n, R), 4.0 * se);
}

TEST(Variance, Errors) {
    const auto ps = generate_s_q(make_modulus(11));
    try {
        variance_geometric(ps, 0.3);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::unsupported_radius);
    }
    try {
        variance_montecarlo(ps, 0.1, 10, 1);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::invalid_argument);
    }
    try {
        variance_spectral(make_modulus(11), 0.5, 1e-6);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::invalid_argument);
    }
}

TEST(Variance, ThreadCountDoesNotChangeBits) {
    const auto ps = generate_s_q(make_modulus(4001));
    const auto table = kloosterman_table(make_modulus(1009));
    set_thread_count(1);
    const auto g1 = variance_geometric(ps, 0.03);
    const auto s1 = variance_spectral(table, 0.05, 1e-6);
    const auto m1 = variance_montecarlo(ps, 0.03, 20000, 3);
    const auto d1 = discrepancy_estimate(generate_s_q(make_modulus(211)), 16);
    set_thread_count(4);
    const auto g4 = variance_geometric(ps, 0.03);
    const auto s4 = variance_spectral(table, 0.05, 1e-6);
    const auto m4 = variance_montecarlo(ps, 0.03, 20000, 3);
    const auto d4 = discrepancy_estimate(generate_s_q(make_modulus(211)), 16);
    set_thread_count(0);
    EXPECT_EQ(g1.value, g4.value);
    EXPECT_EQ(s1.value, s4.value);
    EXPECT_EQ(m1.value, m4.value);
    EXPECT_EQ(m1.certified_error, m4.certified_error);
    EXPECT_EQ(d1.estimate, d4.estimate);
    EXPECT_EQ(d1.witness.center, d4.witness.center);
}

TEST(Discrepancy, WitnessReproducesEstimate) {
    for (std::int64_t q : {2, 13, 101, 1009}) {
        const auto ps = generate_s_q(make_modulus(q));
        const auto d = discrepancy_estimate(ps, 16);
        const double mu = mu_ball(ps, {d.witness.center, d.witness.R});
        EXPECT_EQ(mu, d.witness.mu);
        EXPECT_EQ(std::abs(mu - ball_volume(d.witness.R)), d.estimate);
        EXPECT_LE(d.estimate, 1.0);
    }
    // A single point: a tiny ball on it has measure 1.
    EXPECT_NEAR(discrepancy_estimate(generate_s_q(make_modulus(2)), 4).estimate, 1.0, 1e-12);
}

TEST(Discrepancy, DominatesRandomProbesOnTheCenterGrid) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::int64_t q : {37, 211, 1009}) {
        const auto ps = generate_s_q(make_modulus(q));
        const int G = 12;
        const auto d = discrepancy_estimate(ps, G);
        for (int i = 0; i < 20000; ++i) {
            const TorusPoint y{static_cast<double>(rng() % G) / G, static_cast<double>(rng() % G) / G};
            const double R = 0.4999 * u(rng) + 1e-6;
            const double dev = std::abs(mu_ball(ps, {y, R}) - ball_volume(R));
            ASSERT_LE(dev, d.estimate + 2.0 * pi * 0.5 * probe_offset) << q;
        }
    }
}

TEST(Discrepancy, GridRefinementNeverLowersEstimate) {
    const auto ps = generate_s_q(make_modulus(499));
    EXPECT_LE(discrepancy_estimate(ps, 8).estimate, discrepancy_estimate(ps, 16).estimate);
    EXPECT_LE(discrepancy_estimate(ps, 16).estimate, discrepancy_estimate(ps, 32).estimate);
}

TEST(Discrepancy, BoxEstimateMatchesExhaustiveSearch) {
    for (std::int64_t q : {7, 13, 20}) {
        const auto ps = generate_s_q(make_modulus(q));
        const auto b = box_discrepancy_estimate(ps, 64);
        EXPECT_NEAR(box_deviation(ps, b.x0, b.x1, b.y0, b.y1), b.estimate, 1e-15);
        // Every box whose edges sit just beside point coordinates.
        std::vector<double> e{0.0, 1.0};
        for (const auto& p : ps.points())
            for (double v : {p.x1, p.x2})
                for (double s : {v - probe_offset, v + probe_offset}) e.push_back(s);
        std::sort(e.begin(), e.end());
        e.erase(std::unique(e.begin(), e.end()), e.end());
        double best = 0.0;
        for (std::size_t a = 0; a < e.size(); ++a)
            for (std::size_t c = a + 1; c < e.size(); ++c)
                for (std::size_t g = 0; g < e.size(); ++g)
                    for (std::size_t h = g + 1; h < e.size(); ++h)
                        best = std::max(best, box_deviation(ps, e[a], e[c], e[g], e[h]));
        EXPECT_NEAR(b.estimate, best, 1e-12) << q;
    }
}

TEST(Exceptional, BracketContainsFineGridMeasure) {
    const auto ps = generate_s_q(make_modulus(97));
    for (auto [R, thr] : {std::pair{0.1, 0.01}, {0.05, 0.005}, {0.2, 0.03}}) {
        const auto iv = exceptional_set_measure(ps, R, thr, 128);
        constexpr int F = 800;
        std::size_t bad = 0;
        for (int i = 0; i < F; ++i)
            for (int j = 0; j < F; ++j)
                bad += std::abs(mu_ball(ps, {{(i + 0.5) / F, (j + 0.5) / F}, R}) - ball_volume(R)) > thr;
        const double est = static_cast<double>(bad) / (F * F);
        EXPECT_GE(est, iv.lo - 2e-3) << R;
        EXPECT_LE(est, iv.hi + 2e-3) << R;
        EXPECT_LE(iv.lo, iv.hi);
    }
}

TEST(Exceptional, BracketNarrowsWithGrid) {
    const auto ps = generate_s_q(make_modulus(211));
    const auto a = exceptional_set_measure(ps, 0.08, 0.004, 32);
    const auto b = exceptional_set_measure(ps, 0.08, 0.004, 256);
    EXPECT_LT(b.width(), a.width());
    EXPECT_TRUE(a.intersects(b));
}

TEST(Covering, CornerBallMissesPrimeSets) {
    for (std::int64_t q : primes_between(53, 1500)) ASSERT_EQ(mu_ball(make_modulus(q), corner_ball(q)), 0.0) << q;
    // Below 53 the ball is not always empty.
    bool hit = false;
    for (std::int64_t q : primes_between(3, 47)) hit = hit || mu_ball(make_modulus(q), corner_ball(q)) > 0.0;
    EXPECT_TRUE(hit);
}

TEST(Covering, AverageCoveringBracket) {
    for (std::int64_t q : {101, 997}) {
        const CoverageProfile prof(generate_s_q(make_modulus(q)), 512);
        for (double delta : {0.05, 0.2}) {
            const auto a = avg_covering_radius(prof, delta, 1);
            ASSERT_FALSE(a.degenerate);
            EXPECT_LT(a.radius.lo, a.radius.hi);
            // Above the bracket the inequality holds even for the upper measure;
            // below it it fails even for the lower one.
            EXPECT_LE(prof.uncovered(a.radius.hi).second, std::pow(a.radius.hi, delta));
            EXPECT_GT(prof.uncovered(a.radius.lo).first, std::pow(a.radius.lo, delta));
            EXPECT_LE(a.radius.hi, prof.covering_radius().second);
        }
        const auto neg = avg_covering_radius(prof, 0.05, -1);
        EXPECT_TRUE(neg.degenerate);
        EXPECT_EQ(neg.radius.lo, 0.0);
    }
}

TEST(Covering, ExponentDefinition) {
    // pi R^2 = 1/100 and n = 100 give exponent 1; n = 10 gives 1/2.
    const double R = std::sqrt(0.01 / pi);
    EXPECT_NEAR(covering_exponent(100, R).value(), 1.0, 1e-14);
    EXPECT_NEAR(covering_exponent(10, R).value(), 0.5, 1e-14);
    EXPECT_FALSE(covering_exponent(100, 0.6).has_value());
    EXPECT_FALSE(covering_exponent(100, 0.0).has_value());
    EXPECT_FALSE(covering_exponent(1, 0.1).has_value());
}

TEST(Covering, ReportIsConsistent) {
    const auto rep = covering_report(generate_s_q(make_modulus(997)), 1024, 0.05, 1);
    EXPECT_EQ(rep.q, 997);
    EXPECT_EQ(rep.n, 996u);
    EXPECT_LT(rep.radius.lo, rep.radius.hi);
    ASSERT_TRUE(rep.exponent_hi && rep.exponent_lo);
    // The exponent grows with the radius.
    EXPECT_GE(*rep.exponent_hi, *rep.exponent_lo);
    EXPECT_LT(*rep.exponent_hi, 2.2);
    ASSERT_TRUE(rep.avg_exponent_hi && rep.avg_exponent_lo);
    EXPECT_GT(*rep.avg_exponent_lo, 0.5);
}

TEST(Fit, ExactPowerLaw) {
    std::vector<std::pair<double, double>> rows;
    for (double q : {11.0, 101.0, 1009.0, 10007.0}) rows.emplace_back(q, 3.5 * std::pow(q, -0.4));
    const auto f = exponent_fit(rows);
    EXPECT_NEAR(f.slope, -0.4, 1e-13);
    EXPECT_NEAR(f.intercept, std::log(3.5), 1e-12);
    EXPECT_NEAR(f.stderr_residual, 0.0, 1e-12);
    EXPECT_EQ(f.rows, 4u);
}

TEST(Fit, RejectsBadInput) {
    auto expect_invalid = [](std::vector<std::pair<double, double>> rows) {
        try {
            exponent_fit(rows);
            FAIL();
        } catch (const error& e) {
            EXPECT_EQ(e.code(), errc::invalid_argument);
        }
    };
    expect_invalid({{10, 1}, {100, 2}});
    expect_invalid({{10, 1}, {100, 0}, {1000, 3}});
    expect_invalid({{10, 1}, {10, 2}, {10, 3}});
}

TEST(Sparse, WeylSumsMatchDirectAndBound) {
    for (std::int64_t p : {13, 101, 257}) {
        const Modulus mod = make_modulus(p);
        for (std::int64_t k : {2, 4}) {
            const auto coset = subgroup_by_index(mod, k, 1);
            const auto rep = sparse_report(coset, 3);
            EXPECT_EQ(rep.modes.size(), 48u);
            EXPECT_TRUE(rep.within_bound);
            EXPECT_NEAR(rep.bound, 2.0 * std::sqrt(static_cast<double>(p)) / static_cast<double>(coset.subgroup_order),
                        1e-12);
            for (const auto& m : rep.modes) {
                const double direct = static_cast<double>(std::abs(direct_coset_sum(coset, m.m, m.n))) /
                                      static_cast<double>(coset.subgroup_order);
                ASSERT_NEAR(m.abs_value, direct, 1e-12);
            }
            ASSERT_TRUE(rep.bourgain.has_value());
            EXPECT_TRUE(rep.bourgain->gcd_conditions);
        }
    }
}

TEST(Mixing, DegenerateModesAndValues) {
    const Modulus mod = make_modulus(101);
    const auto rep = mixing_report(mod, 1, 1);
    EXPECT_EQ(rep.modes.size(), 80u);
    bool found = false;
    for (const auto& m : rep.modes) {
        const auto direct = mixing_fourier_direct(1, m.mode, mod);
        ASSERT_NEAR(m.value, direct.real(), 1e-12);
        ASSERT_NEAR(direct.imag(), 0.0, 1e-12);
        EXPECT_EQ(m.degenerate, mixing_mode_degenerate(1, m.mode, mod));
        if (m.mode == Mode4{1, 1, -1, -1}) {
            found = true;
            EXPECT_TRUE(m.degenerate);
            EXPECT_NEAR(m.value, 1.0, 1e-12);
        }
        if (!m.degenerate) ASSERT_LE(std::abs(m.value), m.bound + 1e-12);
    }
    EXPECT_TRUE(found);
    // With a = 1 the mode collapses exactly when m = -m' and n = -n'.
    EXPECT_EQ(rep.degenerate_count, 8u);
}

TEST(Mixing, LargeShiftBound) {
    for (std::int64_t q : {1009, 4999}) {
        const Modulus mod = make_modulus(q);
        const auto a = static_cast<residue>(std::sqrt(static_cast<double>(q)));
        const auto rep = mixing_report(mod, a, 2);
        EXPECT_EQ(rep.degenerate_count, 0u);
        EXPECT_LE(rep.max_abs_nondegenerate, 2.0 * std::sqrt(2.0 * static_cast<double>(q)) / static_cast<double>(q - 1));
    }
}
