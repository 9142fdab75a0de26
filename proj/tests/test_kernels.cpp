#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "modtorus/kernels.hpp"

using namespace modtorus;

namespace {

constexpr double pi = std::numbers::pi;

// Five-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 5> gl_x{0.0, 0.5384693101056831, -0.5384693101056831, 0.9061798459386640,
                                     -0.9061798459386640};
constexpr std::array<double, 5> gl_w{0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                     0.2369268850561891, 0.2369268850561891};

template <class F>
double gauss(F&& f, double a, double b, int pieces) {
    const double h = (b - a) / pieces;
    double s = 0.0;
    for (int i = 0; i < pieces; ++i) {
        const double mid = a + (i + 0.5) * h;
        for (std::size_t j = 0; j < gl_x.size(); ++j) s += gl_w[j] * f(mid + 0.5 * h * gl_x[j]);
    }
    return 0.5 * h * s;
}

// Fourier coefficient of a radial profile f supported in [0, R]:
// integral over the disc of f(|x|) cos(2 pi k . x), with the angular
// integral by the trapezoid rule (exact up to aliasing for periodic data).
template <class F>
double radial_fourier(F&& f, double r_kink, double R, LatticeMode k) {
    const double kk = k.norm();
    auto ring = [&](double r) {
        constexpr int N = 256;
        double s = 0.0;
        for (int i = 0; i < N; ++i) s += std::cos(2.0 * pi * kk * r * std::cos(2.0 * pi * i / N));
        return 2.0 * pi * r * f(r) * s / N;
    };
    return gauss(ring, 0.0, r_kink, 200) + gauss(ring, r_kink, R, 2000);
}

// Area of the intersection of discs of radii a and b at distance d.
double lens(double a, double b, double d) {
    if (d >= a + b) return 0.0;
    if (d <= std::abs(a - b)) return pi * std::min(a, b) * std::min(a, b);
    const double ca = std::clamp((d * d + a * a - b * b) / (2.0 * d * a), -1.0, 1.0);
    const double cb = std::clamp((d * d + b * b - a * a) / (2.0 * d * b), -1.0, 1.0);
    const double k = 0.5 * std::sqrt(std::max(0.0, (-d + a + b) * (d + a - b) * (d - a + b) * (d + a + b)));
    return a * a * std::acos(ca) + b * b * std::acos(cb) - k;
}

// The mollified kernel at distance d: the fraction of the rho-ball around
// d that lies inside the ball of radius R + sign * rho.
double mollified_profile(const KernelSpec& s, double d) {
    return lens(s.outer_radius(), s.rho, d) / (pi * s.rho * s.rho);
}

double torus_distance(double dx, double dy) {
    dx -= std::round(dx);
    dy -= std::round(dy);
    return std::hypot(dx, dy);
}

} // namespace

TEST(Kernels, DocumentedValues) {
    EXPECT_NEAR(hard_ball_fourier(0.1, {0, 0}), 0.031415926535897934, 1e-15);
    // 0.1 J1(0.2 pi) at 30 digits (mpmath).
    EXPECT_NEAR(hard_ball_fourier(0.1, {1, 0}), 0.02989090563133747558, 1e-16);
    EXPECT_NEAR(mollified_fourier(KernelSpec::mollified(0.1, 0.02, 1), {0, 0}), 0.0452389, 5e-8);
    // 2 pi R |k| at the first zero of J1.
    const double R = 3.8317059702075125 / (2.0 * pi * 5.0);
    EXPECT_NEAR(hard_ball_fourier(R, {3, 4}), 0.0, 1e-15);
}

TEST(Kernels, HardBallMatchesQuadrature) {
    for (double R : {0.03, 0.1, 0.27, 0.45}) {
        for (LatticeMode k : {LatticeMode{1, 0}, LatticeMode{2, 3}, LatticeMode{-7, 1}, LatticeMode{0, 12}}) {
            const double q = radial_fourier([](double) { return 1.0; }, 0.5 * R, R, k);
            EXPECT_NEAR(hard_ball_fourier(R, k), q, 1e-12) << R << " " << k.m << "," << k.n;
        }
    }
}

TEST(Kernels, MollifiedMatchesQuadratureOfProfile) {
    const std::vector<KernelSpec> specs{KernelSpec::mollified(0.1, 0.02, -1), KernelSpec::mollified(0.1, 0.02, 1),
                                        KernelSpec::mollified(0.2, 0.05, 1), KernelSpec::mollified(0.3, 0.2, -1)};
    for (const auto& s : specs) {
        const double outer = s.outer_radius() + s.rho;
        const double kink = std::abs(s.outer_radius() - s.rho);
        for (LatticeMode k : {LatticeMode{0, 0}, LatticeMode{3, 4}, LatticeMode{1, -1}, LatticeMode{6, 2}}) {
            const double q = radial_fourier([&](double r) { return mollified_profile(s, r); }, kink, outer, k);
            EXPECT_NEAR(mollified_fourier(s, k), q, 1e-8) << s.R << " " << s.sign << " " << k.m << "," << k.n;
        }
    }
}

TEST(Kernels, ConvolutionFactorization) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        const double R = 0.01 + 0.45 * u(rng);
        const double rho = R * (0.05 + 0.9 * u(rng));
        const int sign = (rng() & 1) ? 1 : -1;
        if (sign > 0 && R + rho >= 0.5) continue;
        const auto s = KernelSpec::mollified(R, rho, sign);
        const LatticeMode k{static_cast<std::int64_t>(rng() % 200) - 100, static_cast<std::int64_t>(rng() % 200) + 1};
        const double lhs = mollified_fourier(s, k);
        const double rhs = hard_ball_fourier(s.outer_radius(), k) * mollifier_factor(rho, k);
        // Scaled by the envelope of the product, since both factors pass through zeros.
        const double r = k.norm(), Rp = s.outer_radius();
        const double scale = Rp / (pi * rho * r * r) * j1_envelope(2.0 * pi * Rp * r) * j1_envelope(2.0 * pi * rho * r);
        ASSERT_NEAR(lhs, rhs, 1e-13 * scale);
    }
}

TEST(Kernels, DefaultMollifierWidth) {
    EXPECT_NEAR(default_mollifier_width(0.1, 1000000), std::pow(1e5, -1.0 / 3.0), 1e-15);
    EXPECT_DOUBLE_EQ(default_mollifier_width(0.01, 1000000), 0.005);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> rdist(1e-4, 0.49);
    for (int i = 0; i < 2000; ++i) {
        const double R = rdist(rng);
        const std::int64_t q = 2 + static_cast<std::int64_t>(rng() % 1000000);
        const double rho = default_mollifier_width(R, q);
        ASSERT_GT(rho, 0.0);
        ASSERT_LT(rho, R);
        EXPECT_NO_THROW(KernelSpec::mollified(R, rho, -1).validate());
        if (R > std::pow(static_cast<double>(q), -0.25)) {
            // The two error terms R rho and sqrt(R / rho) / sqrt(q) coincide.
            ASSERT_NEAR(R * rho, std::sqrt(R / rho / static_cast<double>(q)), 1e-12 * R * rho) << R << " " << q;
        }
    }
    EXPECT_THROW(default_mollifier_width(0.0, 10), error);
    EXPECT_THROW(default_mollifier_width(0.1, 0), error);
}

TEST(Kernels, SpecValidation) {
    auto expect_invalid = [](auto&& f) {
        try {
            f();
            FAIL();
        } catch (const error& e) {
            EXPECT_EQ(e.code(), errc::invalid_argument);
        }
    };
    expect_invalid([] { hard_ball_fourier(0.0, {1, 0}); });
    expect_invalid([] { hard_ball_fourier(0.5, {1, 0}); });
    expect_invalid([] { mollified_fourier(KernelSpec::mollified(0.1, 0.2, 1), {1, 0}); });
    expect_invalid([] { mollified_fourier(KernelSpec::mollified(0.3, 0.25, 1), {1, 0}); });
    expect_invalid([] { mollified_fourier(KernelSpec::hard(0.1), {1, 0}); });
    expect_invalid([] { spectrum_tail_bound(KernelSpec::hard(0.1), CoefficientKind::hard, 10.0); });
    expect_invalid([] { lattice_tail(2.0, 10.0); });
}

TEST(Kernels, LatticeTailBoundsBruteForce) {
    constexpr int L = 1500;
    const std::vector<double> cuts{0.0, 0.5, 1.0, 2.2, 4.0, 7.5, 30.0, 200.0};
    for (double p : {2.5, 3.0, 4.0}) {
        std::vector<double> partial(cuts.size(), 0.0);
        for (int m = -L; m <= L; ++m)
            for (int n = -L; n <= L; ++n) {
                const double r = std::hypot(m, n);
                if (r == 0.0 || r > L) continue;
                const double w = std::pow(r, -p);
                for (std::size_t i = 0; i < cuts.size(); ++i)
                    if (r > cuts[i]) partial[i] += w;
            }
        // The part beyond L is at least the integral over |y| > L + 1.
        const double rest = 2.0 * pi * std::pow(L + 1.0, 2.0 - p) / (p - 2.0);
        for (std::size_t i = 0; i < cuts.size(); ++i) {
            const double bound = lattice_tail(p, cuts[i]);
            EXPECT_GE(bound, partial[i] + rest) << p << " " << cuts[i];
            EXPECT_LE(bound, 3.0 * (partial[i] + rest)) << p << " " << cuts[i];
        }
    }
}

TEST(Kernels, HardSquaredTailBoundsBruteForce) {
    constexpr std::int64_t L = 800;
    const std::vector<double> cuts{3.0, 20.0, 100.0};
    for (double R : {0.05, 0.2, 0.4}) {
        const double k = 2.0 * pi * R;
        std::vector<double> brute(cuts.size(), 0.0);
        for (std::int64_t m = -L; m <= L; ++m)
            for (std::int64_t n = -L; n <= L; ++n) {
                const auto r2 = m * m + n * n;
                if (r2 == 0 || r2 > L * L) continue;
                const double j = bessel_j1(k * std::sqrt(static_cast<double>(r2)));
                const double w = R * R * j * j / static_cast<double>(r2);
                for (std::size_t i = 0; i < cuts.size(); ++i)
                    if (static_cast<double>(r2) > cuts[i] * cuts[i]) brute[i] += w;
            }
        for (std::size_t i = 0; i < cuts.size(); ++i)
            EXPECT_GE(spectrum_tail_bound(KernelSpec::hard(R), CoefficientKind::hard_squared, cuts[i]), brute[i])
                << R << " " << cuts[i];
    }
}

TEST(Kernels, MollifiedTailBoundsBruteForce) {
    constexpr std::int64_t L = 600;
    const std::vector<double> cuts{2.0, 10.0, 50.0};
    for (const auto& spec : {KernelSpec::mollified(0.15, 0.05, 1), KernelSpec::mollified(0.3, 0.1, -1)}) {
        std::vector<double> brute(cuts.size(), 0.0);
        for (std::int64_t m = -L; m <= L; ++m)
            for (std::int64_t n = -L; n <= L; ++n) {
                const LatticeMode k{m, n};
                if (k.norm_sq() == 0 || k.norm_sq() > L * L) continue;
                const double w = std::abs(mollified_fourier(spec, k));
                for (std::size_t i = 0; i < cuts.size(); ++i)
                    if (k.norm() > cuts[i]) brute[i] += w;
            }
        for (std::size_t i = 0; i < cuts.size(); ++i)
            EXPECT_GE(spectrum_tail_bound(spec, CoefficientKind::mollified, cuts[i]), brute[i]) << cuts[i];
    }
}

TEST(Kernels, ForEachModeVisitsDiscInOrder) {
    for (double T : {0.5, 1.0, 1.5, 10.0, 10.5, 37.2}) {
        std::vector<LatticeMode> seen;
        for_each_mode(T, [&](LatticeMode k) { seen.push_back(k); });
        std::size_t expected = 0;
        const int t = static_cast<int>(T) + 1;
        for (int m = -t; m <= t; ++m)
            for (int n = -t; n <= t; ++n) expected += (m != 0 || n != 0) && m * m + n * n <= T * T;
        ASSERT_EQ(seen.size(), expected) << T;
        for (std::size_t i = 1; i < seen.size(); ++i) {
            const bool ordered =
                seen[i - 1].m < seen[i].m || (seen[i - 1].m == seen[i].m && seen[i - 1].n < seen[i].n);
            ASSERT_TRUE(ordered);
        }
    }
}

TEST(Kernels, TruncationCutoffCertifiesTail) {
    const auto spec = KernelSpec::mollified(0.2, 0.1, 1);
    const auto s = truncation_cutoff(spec, CoefficientKind::mollified, 0.05);
    EXPECT_LT(s.tail_bound, 0.05);
    EXPECT_GT(s.T, 0.0);
    // T is the smallest certified cutoff up to its bisection precision.
    EXPECT_GE(spectrum_tail_bound(spec, CoefficientKind::mollified, s.T * (1.0 - 1e-5)), 0.05);
    std::size_t count = 0;
    for_each_mode(s.T, [&](LatticeMode) { ++count; });
    EXPECT_EQ(s.coefficients.size(), count);
    EXPECT_NEAR(s.zero_mode, pi * 0.09, 1e-15);
    for (const auto& e : s.coefficients) ASSERT_EQ(e.value, mollified_fourier(spec, e.mode));
}

TEST(Kernels, TruncationCutoffResourceLimit) {
    try {
        truncation_cutoff(KernelSpec::mollified(0.1, 0.02, 1), CoefficientKind::mollified, 1e-9);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::resource_limit);
    }
    // Certifiable but too large to store.
    try {
        truncation_cutoff(0.1, CoefficientKind::hard_squared, 1e-6);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::resource_limit);
    }
}

TEST(Kernels, HardSquaredCutoffSelfConsistentOnDoubling) {
    // R = 0.1, epsilon = 1e-6: the partial sum over (T, 2T] must stay below epsilon.
    const double R = 0.1, eps = 1e-6;
    const auto cut = certified_cutoff(KernelSpec::hard(R), CoefficientKind::hard_squared, eps);
    const auto T2 = static_cast<std::int64_t>(std::floor(cut.T * cut.T));
    const double change = R * R * radial_j1sq_annulus(2.0 * pi * R, T2, 4 * T2);
    EXPECT_GT(change, 0.0);
    EXPECT_LT(change, eps);
    EXPECT_LT(cut.tail_bound, eps);
}

TEST(Kernels, ReconstructionWithinTailAndSqueeze) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::vector<std::pair<double, double>> shapes{{0.2, 0.1}, {0.15, 0.08}, {0.25, 0.12}, {0.3, 0.09}};
    int samples = 0;
    for (const auto& [R, rho] : shapes) {
        for (int sign : {-1, 1}) {
            const auto spec = KernelSpec::mollified(R, rho, sign);
            const auto s = truncation_cutoff(spec, CoefficientKind::mollified, 0.02);
            for (int i = 0; i < 125; ++i, ++samples) {
                // Half the samples near the edge of B_R, where the squeeze is tight.
                const double d = i % 2 ? R + (u(rng) - 0.5) * 2.0 * rho : 0.5 * std::numbers::sqrt2 * u(rng);
                const double th = 2.0 * pi * u(rng);
                const double dx = d * std::cos(th), dy = d * std::sin(th);
                const double value = s.evaluate(dx, dy);
                const double dist = torus_distance(dx, dy);
                ASSERT_NEAR(value, mollified_profile(spec, dist), s.tail_bound) << R << " " << sign << " " << d;
                const double ind = dist <= R ? 1.0 : 0.0;
                if (sign < 0) ASSERT_LE(value - ind, 2.0 * s.tail_bound);
                if (sign > 0) ASSERT_GE(value - ind, -2.0 * s.tail_bound);
            }
        }
    }
    EXPECT_EQ(samples, 1000);
}

TEST(Kernels, RadialAnnulusMatchesScalarSum) {
    for (double R : {0.01, 0.1, 0.33}) {
        const double k = 2.0 * pi * R;
        for (auto [A2, B2] : {std::pair<std::int64_t, std::int64_t>{0, 50}, {0, 4000}, {17, 9000}, {2000, 250000}}) {
            double brute = 0.0;
            const auto L = static_cast<std::int64_t>(std::sqrt(static_cast<double>(B2))) + 1;
            for (std::int64_t m = -L; m <= L; ++m)
                for (std::int64_t n = -L; n <= L; ++n) {
                    const auto r2 = m * m + n * n;
                    if (r2 > A2 && r2 <= B2) {
                        const double j = bessel_j1(k * std::sqrt(static_cast<double>(r2)));
                        brute += j * j / static_cast<double>(r2);
                    }
                }
            EXPECT_NEAR(radial_j1sq_annulus(k, A2, B2), brute, 1e-12 * brute) << R << " " << A2 << " " << B2;
        }
    }
}

TEST(Kernels, ParsevalQuick) {
    for (double R : {0.05, 0.1, 0.2, 0.3, 0.45}) {
        const auto p = parseval_residual(R, 1e-4);
        const double vol = pi * R * R;
        EXPECT_DOUBLE_EQ(p.target, vol - vol * vol);
        EXPECT_LT(p.residual, 2e-4) << R;
        EXPECT_NEAR(p.residual, std::abs(p.partial_sum - p.target) + p.tail_bound, 1e-15);
        EXPECT_LT(p.partial_sum, p.target) << R;
    }
    EXPECT_NEAR(parseval_residual(0.25, 1e-4).target, 0.15779639865760675, 1e-15);
    EXPECT_LT(parseval_residual(1e-3, 1e-4).target, 4e-6);
}

TEST(Kernels, ParsevalDetectsWrongTarget) {
    // A partial sum that converges to vol - vol^2 cannot also approach vol.
    const auto p = parseval_residual(0.2, 1e-4);
    const double vol = pi * 0.04;
    EXPECT_GT(std::abs(p.partial_sum - vol), 10.0 * p.residual);
}

TEST(Kernels, EnvelopeSelfCheck) {
    const auto c = check_j1_envelope();
    EXPECT_EQ(c.points, 2000u);
    EXPECT_EQ(c.violations, 0u);
    // |J1(x)| / (x / 2) tends to 1 at the origin; beyond x = 4 sqrt(x) |J1(x)|
    // peaks at the first extremum, 0.8028 on this grid (scipy).
    EXPECT_LE(c.worst_ratio, 1.0);
    EXPECT_GT(c.worst_ratio, 0.999);
    const auto far = check_j1_envelope(bessel_j1, 4.0, 1e6, 2000);
    EXPECT_NEAR(far.worst_ratio, 0.802800202174346, 1e-12);
}
