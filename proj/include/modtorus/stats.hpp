#pragma once

/**
 * @file stats.hpp
 * @brief Equidistribution statistics of point sets on the torus: ball
 * discrepancy, variance of ball counts (three independent methods),
 * exceptional sets, covering radii and exponents, sparse-coset and mixing
 * reports, and log-log exponent fits.
 */

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "modtorus/arith.hpp"
#include "modtorus/error.hpp"
#include "modtorus/expsum.hpp"
#include "modtorus/kernels.hpp"
#include "modtorus/parallel.hpp"
#include "modtorus/torusgeo.hpp"

namespace modtorus {

inline double ball_volume(double R) { return std::numbers::pi * R * R; }

inline double mu_ball(const PointSet& ps, const BallSpec& ball) {
    return static_cast<double>(ball_count(ps, ball)) / static_cast<double>(ps.size());
}

inline double mu_ball(const Modulus& mod, const BallSpec& ball) { return mu_ball(generate_s_q(mod), ball); }

/// The ball at (1/(2 sqrt q), 1/(2 sqrt q)) of radius 1/(2 sqrt q), which
/// misses S_q for every prime q >= 53.
inline BallSpec corner_ball(std::int64_t q) {
    const double r = 1.0 / (2.0 * std::sqrt(static_cast<double>(q)));
    return {{r, r}, r};
}

// -----------------------------------------------------------------------------
// Discrepancy
// -----------------------------------------------------------------------------

inline constexpr double probe_offset = 1e-9;

struct DiscrepancyWitness {
    TorusPoint center;
    double R = 0.0;
    double mu = 0.0;
};

struct DiscrepancyReport {
    std::string label;
    std::size_t n = 0;
    double estimate = 0.0;  // certified lower bound for the ball discrepancy
    DiscrepancyWitness witness;
    int center_grid = 0;
    std::size_t radii_per_center = 0;  // largest number of radii probed at one center
};

/// Lower bound for sup |mu(B_R(y)) - pi R^2| over centers on the corner
/// grid { (i/G, j/G) } and radii in (0, 1/2). At each center the counting
/// function only jumps at point distances, so probing every distance at
/// -eta and +eta (plus R -> 0+ and R -> 1/2-) sees both one-sided limits.
inline DiscrepancyReport discrepancy_estimate(const PointSet& ps, int G) {
    require(G >= 4, errc::invalid_argument, "discrepancy center grid needs G >= 4");
    require(!ps.empty(), errc::invalid_argument, "discrepancy of an empty point set");
    const double n = static_cast<double>(ps.size());
    const double eta = probe_offset;

    struct best_t {
        double dev = -1.0;
        DiscrepancyWitness w;
        std::size_t radii = 0;
    };
    const std::size_t centers = static_cast<std::size_t>(G) * static_cast<std::size_t>(G);
    const auto best = parallel_reduce(
        centers, 16, best_t{},
        [&](std::size_t b, std::size_t e) {
            best_t local;
            std::vector<double> d2;
            d2.reserve(ps.size());
            for (std::size_t c = b; c < e; ++c) {
                const TorusPoint y{static_cast<double>(c / static_cast<std::size_t>(G)) / G,
                                   static_cast<double>(c % static_cast<std::size_t>(G)) / G};
                d2.clear();
                for (const auto& p : ps.points()) {
                    const double s = toroidal_distance_sq(p, y);
                    if (s < 0.25) d2.push_back(s);
                }
                std::sort(d2.begin(), d2.end());
                auto probe = [&](double R) {
                    if (!(R > 0.0 && R < 0.5)) return;
                    const double R2 = R * R;
                    const auto count = std::upper_bound(d2.begin(), d2.end(), R2) - d2.begin();
                    const double mu = static_cast<double>(count) / n;
                    const double dev = std::abs(mu - ball_volume(R));
                    if (dev > local.dev) local = {dev, {y, R, mu}, local.radii};
                };
                probe(eta);
                probe(0.5 - eta);
                std::size_t radii = 2;
                for (std::size_t i = 0; i < d2.size(); ++i) {
                    if (i > 0 && d2[i] == d2[i - 1]) continue;
                    const double d = std::sqrt(d2[i]);
                    probe(d - eta);
                    probe(d + eta);
                    radii += 2;
                }
                local.radii = std::max(local.radii, radii);
            }
            return local;
        },
        [](best_t& acc, const best_t& p) {
            const std::size_t radii = std::max(acc.radii, p.radii);
            if (p.dev > acc.dev) acc = p;
            acc.radii = radii;
        });
    return {ps.label(), ps.size(), best.dev, best.w, G, best.radii};
}

/// |mu([x0, x1) x [y0, y1)) - area| for an axis-parallel box inside [0,1)^2.
inline double box_deviation(const PointSet& ps, double x0, double x1, double y0, double y1) {
    const auto count = std::count_if(ps.points().begin(), ps.points().end(), [&](const TorusPoint& p) {
        return p.x1 >= x0 && p.x1 < x1 && p.x2 >= y0 && p.x2 < y1;
    });
    return std::abs(static_cast<double>(count) / static_cast<double>(ps.size()) - (x1 - x0) * (y1 - y0));
}

struct BoxDiscrepancyReport {
    double estimate = 0.0;
    double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
};

/// Lower bound for the box discrepancy. Box edges are drawn from G point
/// coordinates per axis (an evenly spaced subsample of the sorted
/// coordinates), each offset by -eta and +eta, plus 0 and 1; every box on
/// that grid is scored with 2-D prefix counts.
inline BoxDiscrepancyReport box_discrepancy_estimate(const PointSet& ps, int G) {
    require(G >= 4, errc::invalid_argument, "box discrepancy grid needs G >= 4");
    require(!ps.empty(), errc::invalid_argument, "box discrepancy of an empty point set");
    const std::size_t n = ps.size();
    auto edges = [&](auto coord) {
        std::vector<double> c;
        for (const auto& p : ps.points()) c.push_back(coord(p));
        std::sort(c.begin(), c.end());
        std::vector<double> e{0.0, 1.0};
        const std::size_t picks = std::min<std::size_t>(static_cast<std::size_t>(G), n);
        for (std::size_t i = 0; i < picks; ++i) {
            const double v = c[i * n / picks];
            for (double s : {v - probe_offset, v + probe_offset}) {
                if (s > 0.0 && s < 1.0) e.push_back(s);
            }
        }
        std::sort(e.begin(), e.end());
        e.erase(std::unique(e.begin(), e.end()), e.end());
        return e;
    };
    const auto ex = edges([](const TorusPoint& p) { return p.x1; });
    const auto ey = edges([](const TorusPoint& p) { return p.x2; });
    const std::size_t kx = ex.size(), ky = ey.size();
    // P[i][j] = #{ p : x1 < ex[i], x2 < ey[j] }
    std::vector<std::int64_t> P(kx * ky, 0);
    for (const auto& p : ps.points()) {
        const std::size_t i = static_cast<std::size_t>(std::upper_bound(ex.begin(), ex.end(), p.x1) - ex.begin());
        const std::size_t j = static_cast<std::size_t>(std::upper_bound(ey.begin(), ey.end(), p.x2) - ey.begin());
        if (i < kx && j < ky) ++P[i * ky + j];
    }
    for (std::size_t i = 0; i < kx; ++i) {
        for (std::size_t j = 0; j < ky; ++j) {
            std::int64_t v = P[i * ky + j];
            if (i > 0) v += P[(i - 1) * ky + j];
            if (j > 0) v += P[i * ky + j - 1];
            if (i > 0 && j > 0) v -= P[(i - 1) * ky + j - 1];
            P[i * ky + j] = v;
        }
    }
    BoxDiscrepancyReport best{-1.0};
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t a = 0; a < kx; ++a) {
        for (std::size_t b = a + 1; b < kx; ++b) {
            const double w = ex[b] - ex[a];
            for (std::size_t c = 0; c < ky; ++c) {
                for (std::size_t d = c + 1; d < ky; ++d) {
                    const std::int64_t count = P[b * ky + d] - P[a * ky + d] - P[b * ky + c] + P[a * ky + c];
                    const double dev = std::abs(static_cast<double>(count) * inv_n - w * (ey[d] - ey[c]));
                    if (dev > best.estimate) best = {dev, ex[a], ex[b], ey[c], ey[d]};
                }
            }
        }
    }
    return best;
}

// -----------------------------------------------------------------------------
// Variance of ball counts
// -----------------------------------------------------------------------------

enum class VarianceMethod { geometric, spectral, montecarlo, random_baseline };

inline const char* to_string(VarianceMethod m) {
    switch (m) {
    case VarianceMethod::geometric: return "geometric";
    case VarianceMethod::spectral: return "spectral";
    case VarianceMethod::montecarlo: return "montecarlo";
    case VarianceMethod::random_baseline: return "random-baseline";
    }
    return "unknown";
}

/// The integral over centers x of (mu(B_R(x)) - pi R^2)^2.
struct VarianceReport {
    std::string label;
    std::int64_t q = 0;  // 0 when the point set is not S_q
    std::size_t n = 0;
    double R = 0.0;
    VarianceMethod method = VarianceMethod::geometric;
    double value = 0.0;
    double certified_error = 0.0;  // for montecarlo: one standard error
    double diagonal_part = 0.0;
    double offdiagonal_part = 0.0;
    double wall_time = 0.0;
    double cutoff = 0.0;           // spectral only
    std::uint64_t samples = 0;     // montecarlo only
    std::uint64_t seed = 0;        // montecarlo only
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::int64_t q_from_label(const std::string& label) {
    if (label.rfind("s_q(", 0) != 0) return 0;
    return std::stoll(label.substr(4));
}

} // namespace detail

/// Exact variance from pair geometry: the integral equals
/// (1/n^2) sum over ordered pairs of lens_area(dist, R) minus (pi R^2)^2.
/// Pairs further apart than 2R contribute nothing and are never visited.
inline VarianceReport variance_geometric(const PointSet& ps, double R) {
    const auto t0 = std::chrono::steady_clock::now();
    require(std::isfinite(R) && R > 0.0, errc::invalid_argument, "variance radius must be positive");
    require(R < 0.25, errc::unsupported_radius, "geometric variance needs R < 1/4; use the spectral method");
    require(!ps.empty(), errc::invalid_argument, "variance of an empty point set");
    const double n = static_cast<double>(ps.size());
    const double vol = ball_volume(R);
    const double reach2 = 4.0 * R * R;
    const auto& pts = ps.points();
    const auto off = parallel_reduce(
        pts.size(), 512, compensated_sum{},
        [&](std::size_t b, std::size_t e) {
            compensated_sum acc;
            for (std::size_t i = b; i < e; ++i) {
                ps.for_each_candidate(pts[i], 2.0 * R, [&](std::uint32_t j) {
                    if (j == i) return;
                    const double d2 = toroidal_distance_sq(pts[i], pts[j]);
                    if (d2 < reach2) acc.add(lens_area(std::sqrt(d2), R));
                });
            }
            return acc;
        },
        [](compensated_sum& a, const compensated_sum& p) { a.merge(p); });

    VarianceReport r;
    r.label = ps.label();
    r.q = detail::q_from_label(ps.label());
    r.n = ps.size();
    r.R = R;
    r.method = VarianceMethod::geometric;
    r.diagonal_part = vol / n;
    r.offdiagonal_part = off.value() / (n * n);
    compensated_sum total;
    total.add(r.diagonal_part);
    total.add(r.offdiagonal_part);
    total.add(-vol * vol);
    r.value = total.value();
    // Each lens area carries a few ulps; the sums are compensated.
    r.certified_error = 1e-13 * (r.diagonal_part + r.offdiagonal_part + vol * vol) + 1e-300;
    r.wall_time = detail::seconds_since(t0);
    return r;
}

enum class SpectralWeights {
    full,           // S(m, n; q)^2
    diagonal_only,  // S^2 replaced by its d1 = d2 part, phi(q)
};

/// Certified tail of the spectral variance sum beyond |k| = T.
///
/// With |S(m,n;q)| <= tau(q) sqrt(gcd(m,n,q) q) and J1(x)^2 <= c/x, the
/// dropped part is at most (R^2/phi^2) tau^2 q (c / 2 pi R) sum gcd / r^3,
/// and writing gcd(m,n,q) = sum over d | gcd of phi(d) turns the last sum
/// into sum over d | q of phi(d) d^-3 lattice_tail(3, T/d).
inline double variance_spectral_tail(const Modulus& mod, double R, double T, SpectralWeights weights) {
    const double phi = static_cast<double>(mod.phi());
    const double c = j1_squared_envelope(2.0 * std::numbers::pi * R * T);
    const double base = R * R * c / (2.0 * std::numbers::pi * R);
    if (weights == SpectralWeights::diagonal_only) return base / phi * lattice_tail(3.0, T);
    std::vector<std::int64_t> divisors{1};
    for (const auto& [p, e] : mod.factors()) {
        const std::size_t k = divisors.size();
        std::int64_t pk = 1;
        for (int i = 1; i <= e; ++i) {
            pk *= p;
            for (std::size_t j = 0; j < k; ++j) divisors.push_back(divisors[j] * pk);
        }
    }
    std::sort(divisors.begin(), divisors.end());
    double gcd_sum = 0.0;
    for (std::int64_t d : divisors) {
        const double dd = static_cast<double>(d);
        gcd_sum += static_cast<double>(make_modulus(d).phi()) / (dd * dd * dd) * lattice_tail(3.0, T / dd);
    }
    const double tau = static_cast<double>(mod.tau());
    return base / (phi * phi) * tau * tau * static_cast<double>(mod.value()) * gcd_sum;
}

/// Variance through the Fourier expansion:
/// (R^2 / phi^2) sum over k != 0 of J1(2 pi R |k|)^2 / |k|^2 S(k mod q)^2.
///
/// The weight is invariant under the eight lattice symmetries and
/// S(m, n) = S(n, m) = S(-m, -n), so each octant point (m, n) with
/// 0 < n < m stands for 4 (S(m,n)^2 + S(m,-n)^2) and the rays n = 0 and
/// n = m for half of that.
inline VarianceReport variance_spectral(const KloostermanTable& table, double R, double epsilon,
                                        SpectralWeights weights = SpectralWeights::full) {
    const auto t0 = std::chrono::steady_clock::now();
    require(std::isfinite(R) && R > 0.0 && R < 0.5, errc::invalid_argument, "variance radius must lie in (0, 1/2)");
    const Modulus& mod = table.modulus();
    const double phi = static_cast<double>(mod.phi());
    const std::int64_t q = mod.value();
    const auto cut = solve_cutoff([&](double T) { return variance_spectral_tail(mod, R, T, weights); }, 0.5 * epsilon);
    const double T = cut.T;
    const auto t = static_cast<std::int64_t>(std::floor(T));
    const auto T2 = static_cast<std::int64_t>(std::floor(T * T));
    const double k = 2.0 * std::numbers::pi * R;

    auto s2 = [&](std::int64_t m, std::int64_t n) {
        if (weights == SpectralWeights::diagonal_only) return 2.0 * phi;
        const auto mr = static_cast<std::size_t>(m % q);
        const double a = table.at(mr, static_cast<std::size_t>(n % q));
        const double b = table.at(mr, static_cast<std::size_t>(((-n) % q + q) % q));
        return a * a + b * b;
    };

    const auto sum = parallel_reduce(
        static_cast<std::size_t>(t), 64, compensated_sum{},
        [&](std::size_t b, std::size_t e) {
            compensated_sum acc;
            std::vector<double> w;
            for (std::size_t row = b; row < e; ++row) {
                const auto m = static_cast<std::int64_t>(row) + 1;
                if (m * m > T2) break;
                const std::int64_t n_hi = std::min(m, detail::isqrt_floor(T2 - m * m));
                w.resize(static_cast<std::size_t>(n_hi + 1));
                if (k * static_cast<double>(m) >= fast_j1_threshold) {
                    j1sq_over_r2_row(k, m, 0, n_hi, w.data());
                } else {
                    for (std::int64_t n = 0; n <= n_hi; ++n) w[static_cast<std::size_t>(n)] = detail::j1sq_over_r2_scalar(k, m, n);
                }
                compensated_sum row_acc;
                for (std::int64_t n = 0; n <= n_hi; ++n) {
                    const double mult = (n == 0 || n == m) ? 2.0 : 4.0;
                    row_acc.add(mult * w[static_cast<std::size_t>(n)] * s2(m, n));
                }
                acc.merge(row_acc);
            }
            return acc;
        },
        [](compensated_sum& a, const compensated_sum& p) { a.merge(p); });

    const double vol = ball_volume(R);
    VarianceReport r;
    r.label = "s_q(" + std::to_string(q) + ")";
    r.q = q;
    r.n = static_cast<std::size_t>(mod.phi());
    r.R = R;
    r.method = VarianceMethod::spectral;
    r.value = R * R / (phi * phi) * sum.value();
    r.cutoff = T;
    r.certified_error = cut.tail_bound + 1e-12 * std::abs(r.value) + 1e-15 * vol;
    r.diagonal_part = (vol - vol * vol) / phi;
    r.offdiagonal_part = r.value - r.diagonal_part;
    r.wall_time = detail::seconds_since(t0);
    return r;
}

inline VarianceReport variance_spectral(const Modulus& mod, double R, double epsilon,
                                        SpectralWeights weights = SpectralWeights::full,
                                        std::int64_t table_cap = default_table_cap) {
    return variance_spectral(kloosterman_table(mod, table_cap), R, epsilon, weights);
}

/// Sample mean of (mu(B_R(x)) - pi R^2)^2 over uniform centers; the
/// reported error is one standard error.
inline VarianceReport variance_montecarlo(const PointSet& ps, double R, std::uint64_t samples, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    require(samples >= 1000, errc::invalid_argument, "Monte Carlo variance needs at least 1000 samples");
    require(std::isfinite(R) && R > 0.0 && R < 0.5, errc::invalid_argument, "variance radius must lie in (0, 1/2)");
    const double vol = ball_volume(R);
    const double n = static_cast<double>(ps.size());
    Xoshiro256 rng(seed);
    std::vector<TorusPoint> centers(samples);
    for (auto& c : centers) {
        c.x1 = rng.uniform();
        c.x2 = rng.uniform();
    }
    struct moments {
        compensated_sum s1, s2;
    };
    const auto m = parallel_reduce(
        centers.size(), 4096, moments{},
        [&](std::size_t b, std::size_t e) {
            moments acc;
            for (std::size_t i = b; i < e; ++i) {
                const double dev = static_cast<double>(ball_count(ps, {centers[i], R})) / n - vol;
                acc.s1.add(dev * dev);
                acc.s2.add(dev * dev * dev * dev);
            }
            return acc;
        },
        [](moments& a, const moments& p) {
            a.s1.merge(p.s1);
            a.s2.merge(p.s2);
        });
    const double N = static_cast<double>(samples);
    const double mean = m.s1.value() / N;
    const double var = std::max(0.0, (m.s2.value() / N - mean * mean) * N / (N - 1.0));

    VarianceReport r;
    r.label = ps.label();
    r.q = detail::q_from_label(ps.label());
    r.n = ps.size();
    r.R = R;
    r.method = VarianceMethod::montecarlo;
    r.value = mean;
    r.certified_error = std::sqrt(var / N);
    r.diagonal_part = vol / n;
    r.offdiagonal_part = mean + vol * vol - r.diagonal_part;
    r.samples = samples;
    r.seed = seed;
    r.wall_time = detail::seconds_since(t0);
    return r;
}

/// Expected variance for n independent uniform points: the count in a
/// fixed ball is Binomial(n, v), so E(count/n - v)^2 = v (1 - v) / n.
inline double random_variance_baseline(std::size_t n, double R) {
    require(n >= 1, errc::invalid_argument, "baseline needs n >= 1");
    require(std::isfinite(R) && R > 0.0 && R < 0.5, errc::invalid_argument, "radius must lie in (0, 1/2)");
    const double v = ball_volume(R);
    return v * (1.0 - v) / static_cast<double>(n);
}

// -----------------------------------------------------------------------------
// Exceptional sets
// -----------------------------------------------------------------------------

/// Two-sided estimate of vol{ y : |mu(B_R(y)) - pi R^2| > threshold }.
/// For y in a cell with center c and half-diagonal h, B_R(y) lies between
/// B_(R-h)(c) and B_(R+h)(c), which brackets mu(B_R(y)) for the whole cell.
inline Interval exceptional_set_measure(const PointSet& ps, double R, double threshold, int G) {
    require(G >= 16, errc::invalid_argument, "exceptional set grid needs G >= 16");
    require(std::isfinite(R) && R > 0.0 && R < 0.5, errc::invalid_argument, "radius must lie in (0, 1/2)");
    require(threshold > 0.0, errc::invalid_argument, "threshold must be positive");
    const double n = static_cast<double>(ps.size());
    const double vol = ball_volume(R);
    const double h = std::numbers::sqrt2 / (2.0 * G);
    const double r_in2 = R > h ? (R - h) * (R - h) : -1.0;
    const double r_out = std::min(R + h, 0.5 - 1e-12);
    const double r_out2 = (R + h) * (R + h);
    struct counts {
        std::int64_t sure = 0, maybe = 0;
    };
    const auto c = parallel_reduce(
        static_cast<std::size_t>(G), 4, counts{},
        [&](std::size_t b, std::size_t e) {
            counts acc;
            for (std::size_t i = b; i < e; ++i) {
                for (int j = 0; j < G; ++j) {
                    const TorusPoint y{(static_cast<double>(i) + 0.5) / G, (j + 0.5) / G};
                    std::int64_t inner = 0, outer = 0;
                    ps.for_each_candidate(y, r_out, [&](std::uint32_t k) {
                        const double d2 = toroidal_distance_sq(ps.points()[k], y);
                        if (d2 <= r_out2) ++outer;
                        if (d2 <= r_in2) ++inner;
                    });
                    const double lo = static_cast<double>(inner) / n - vol;
                    const double hi = static_cast<double>(outer) / n - vol;
                    const double max_dev = std::max(std::abs(lo), std::abs(hi));
                    const double min_dev = (lo <= 0.0 && hi >= 0.0) ? 0.0 : std::min(std::abs(lo), std::abs(hi));
                    if (min_dev > threshold) ++acc.sure;
                    if (max_dev > threshold) ++acc.maybe;
                }
            }
            return acc;
        },
        [](counts& a, const counts& p) {
            a.sure += p.sure;
            a.maybe += p.maybe;
        });
    const double area = 1.0 / (static_cast<double>(G) * G);
    return {static_cast<double>(c.sure) * area, static_cast<double>(c.maybe) * area};
}

// -----------------------------------------------------------------------------
// Covering
// -----------------------------------------------------------------------------

struct AverageCovering {
    double delta = 0.0;
    int sign = 1;
    Interval radius;          // certified bracket for the threshold radius
    bool degenerate = false;  // the defining inequality already holds at the smallest probed radius
};

inline constexpr double avg_covering_min_radius = 1e-9;

/// Least R with uncovered measure <= R^(sign * delta), bracketed by
/// bisection on the certified lower and upper uncovered measures.
///
/// With sign = -1 the right-hand side is at least 1 for R < 1, so the
/// inequality holds at every radius and the result is flagged degenerate.
inline AverageCovering avg_covering_radius(const CoverageProfile& profile, double delta, int sign) {
    require(delta > 0.0, errc::invalid_argument, "delta must be positive");
    require(sign == 1 || sign == -1, errc::invalid_argument, "exponent sign must be +1 or -1");
    const double lo_end = avg_covering_min_radius;
    const double hi_end = profile.covering_radius().second;
    auto holds_hi = [&](double R) { return profile.uncovered(R).second <= std::pow(R, sign * delta); };
    auto holds_lo = [&](double R) { return profile.uncovered(R).first <= std::pow(R, sign * delta); };
    // Returns a < b bracketing the switch point of a monotone predicate.
    auto least = [&](auto&& holds) {
        if (holds(lo_end)) return Interval{0.0, lo_end};
        double a = lo_end, b = hi_end;
        for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
            const double mid = 0.5 * (a + b);
            (holds(mid) ? b : a) = mid;
        }
        return Interval{a, b};
    };
    AverageCovering out;
    out.delta = delta;
    out.sign = sign;
    // U_lo <= U <= U_hi, so the U_lo threshold comes first.
    out.radius = {least(holds_lo).lo, least(holds_hi).hi};
    out.degenerate = holds_hi(lo_end);
    if (out.degenerate) out.radius = {0.0, lo_end};
    return out;
}

inline AverageCovering avg_covering_radius(const PointSet& ps, double delta, int sign, int G) {
    return avg_covering_radius(CoverageProfile(ps, G), delta, sign);
}

/// -log n / log(pi R^2); undefined when pi R^2 >= 1 or R <= 0.
inline std::optional<double> covering_exponent(std::size_t n, double R) {
    const double v = ball_volume(R);
    if (!(R > 0.0) || v >= 1.0 || n < 2) return std::nullopt;
    return -std::log(static_cast<double>(n)) / std::log(v);
}

struct CoveringReport {
    std::string label;
    std::int64_t q = 0;
    std::size_t n = 0;
    int grid = 0;
    Interval radius;
    std::optional<double> exponent_hi;  // from radius.hi
    std::optional<double> exponent_lo;  // from radius.lo
    AverageCovering average;
    std::optional<double> avg_exponent_hi;
    std::optional<double> avg_exponent_lo;
};

inline CoveringReport covering_report(const PointSet& ps, int G, double delta, int sign) {
    const CoverageProfile profile(ps, G);
    CoveringReport r;
    r.label = ps.label();
    r.q = detail::q_from_label(ps.label());
    r.n = ps.size();
    r.grid = G;
    const auto [lo, hi] = profile.covering_radius();
    r.radius = {lo, hi};
    r.exponent_hi = covering_exponent(r.n, hi);
    r.exponent_lo = covering_exponent(r.n, lo);
    r.average = avg_covering_radius(profile, delta, sign);
    if (!r.average.degenerate) {
        r.avg_exponent_hi = covering_exponent(r.n, r.average.radius.hi);
        r.avg_exponent_lo = covering_exponent(r.n, r.average.radius.lo);
    }
    return r;
}

// -----------------------------------------------------------------------------
// Fits and sweeps
// -----------------------------------------------------------------------------

struct ExponentFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_residual = 0.0;  // residual standard error of the regression
    std::size_t rows = 0;
};

/// Ordinary least squares of log(value) on log(q).
inline ExponentFit exponent_fit(const std::vector<std::pair<double, double>>& rows) {
    require(rows.size() >= 3, errc::invalid_argument, "exponent fit needs at least 3 rows");
    std::vector<double> x, y;
    for (const auto& [q, v] : rows) {
        require(q > 0.0 && v > 0.0 && std::isfinite(v), errc::invalid_argument, "exponent fit needs positive values");
        x.push_back(std::log(q));
        y.push_back(std::log(v));
    }
    const double n = static_cast<double>(rows.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    require(sxx > 0.0, errc::invalid_argument, "exponent fit needs at least two distinct q");
    ExponentFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (f.intercept + f.slope * x[i]);
        rss += e * e;
    }
    f.stderr_residual = std::sqrt(rss / (n - 2.0));
    f.rows = rows.size();
    return f;
}

struct SweepRow {
    std::int64_t q = 0;
    double value = 0.0;
    std::vector<std::pair<std::string, double>> auxiliary;
};

struct SweepResult {
    std::string statistic;
    std::vector<SweepRow> rows;
    std::optional<ExponentFit> fit;  // empty when a value is not positive
};

inline ExponentFit fit_rows(const std::vector<SweepRow>& rows) {
    std::vector<std::pair<double, double>> xy;
    for (const auto& r : rows) xy.emplace_back(static_cast<double>(r.q), r.value);
    return exponent_fit(xy);
}

/// Covering radius and average covering radius for each prime.
inline std::pair<SweepResult, std::vector<CoveringReport>> covering_exponent_sweep(
    const std::vector<std::int64_t>& primes, int G, double delta = 0.05, int sign = 1) {
    require(primes.size() >= 5, errc::invalid_argument, "covering sweep needs at least 5 primes");
    SweepResult s;
    s.statistic = "covering";
    std::vector<CoveringReport> reports;
    for (std::int64_t q : primes) {
        auto rep = covering_report(generate_s_q(make_modulus(q)), G, delta, sign);
        SweepRow row{q, rep.radius.hi, {{"radius_lo", rep.radius.lo},
                                        {"exponent_hi", rep.exponent_hi.value_or(std::nan(""))},
                                        {"exponent_lo", rep.exponent_lo.value_or(std::nan(""))},
                                        {"avg_radius_lo", rep.average.radius.lo},
                                        {"avg_radius_hi", rep.average.radius.hi},
                                        {"avg_exponent_hi", rep.avg_exponent_hi.value_or(std::nan(""))},
                                        {"avg_exponent_lo", rep.avg_exponent_lo.value_or(std::nan(""))}}};
        s.rows.push_back(std::move(row));
        reports.push_back(std::move(rep));
    }
    s.fit = fit_rows(s.rows);
    return {s, reports};
}

// -----------------------------------------------------------------------------
// Sparse cosets and mixing
// -----------------------------------------------------------------------------

struct SparseModeValue {
    std::int64_t m = 0, n = 0;
    double abs_value = 0.0;
    double bound = 0.0;  // tau(q) sqrt(gcd(m,n,q) q) / #H
};

struct SparseReport {
    std::int64_t q = 0;
    residue representative = 1;
    std::int64_t subgroup_order = 0;
    int max_mode = 0;
    double max_abs = 0.0;
    std::int64_t argmax_m = 0, argmax_n = 0;
    double bound = 0.0;  // tau(q) sqrt(q) / #H
    bool within_bound = true;  // every mode below its gcd-aware bound + 1e-9
    std::vector<SparseModeValue> modes;
    std::optional<BourgainConditionReport> bourgain;
};

/// Weyl sums of the coset over all modes with 0 < max(|m|, |n|) <= M.
inline SparseReport sparse_report(const SubgroupCoset& coset, int M, double bourgain_delta = 0.1) {
    require(M >= 1, errc::invalid_argument, "mode cutoff must be >= 1");
    const Modulus& mod = coset.modulus;
    const std::int64_t q = mod.value();
    const RootsOfUnity roots(q);
    std::vector<residue> inv;
    for (residue d : coset.elements) inv.push_back(mod_inverse(d, mod));
    const double H = static_cast<double>(coset.subgroup_order);

    SparseReport r;
    r.q = q;
    r.representative = coset.representative;
    r.subgroup_order = coset.subgroup_order;
    r.max_mode = M;
    r.bound = static_cast<double>(mod.tau()) * std::sqrt(static_cast<double>(q)) / H;
    r.max_abs = -1.0;
    for (int m = -M; m <= M; ++m) {
        for (int n = -M; n <= M; ++n) {
            if (m == 0 && n == 0) continue;
            compensated_complex_sum acc;
            for (std::size_t i = 0; i < coset.elements.size(); ++i) {
                acc.add(roots((mul_mod(m, coset.elements[i], q) + mul_mod(n, inv[i], q)) % q));
            }
            const double v = std::abs(acc.value()) / H;
            const double b = weil_rhs(m, n, mod) / H;
            r.modes.push_back({m, n, v, b});
            if (v > b + 1e-9) r.within_bound = false;
            if (v > r.max_abs) {
                r.max_abs = v;
                r.argmax_m = m;
                r.argmax_n = n;
            }
        }
    }
    if (mod.is_prime()) r.bourgain = bourgain_condition(coset.subgroup_order, mod, bourgain_delta);
    return r;
}

struct MixingModeValue {
    Mode4 mode;
    double value = 0.0;  // S(m + a m', n + abar n'; q) / phi(q), real
    double bound = 0.0;  // tau(q) sqrt(gcd q) / phi(q) for the collapsed mode
    bool degenerate = false;
};

struct MixingReport {
    std::int64_t q = 0;
    residue a = 1;
    int max_mode = 0;
    double max_abs_nondegenerate = 0.0;
    std::size_t degenerate_count = 0;
    std::vector<MixingModeValue> modes;
};

inline MixingReport mixing_report(const Modulus& mod, residue a, int M) {
    require(M >= 1, errc::invalid_argument, "mode cutoff must be >= 1");
    const std::int64_t q = mod.value();
    const residue abar = mod_inverse(a, mod);
    const auto units = unit_group(mod);
    const RootsOfUnity roots(q);

    std::vector<Mode4> modes;
    for (int m = -M; m <= M; ++m)
        for (int n = -M; n <= M; ++n)
            for (int mp = -M; mp <= M; ++mp)
                for (int np = -M; np <= M; ++np)
                    if (m != 0 || n != 0 || mp != 0 || np != 0) modes.push_back({m, n, mp, np});

    MixingReport r;
    r.q = q;
    r.a = canonical(a, q);
    r.max_mode = M;
    r.modes.resize(modes.size());
    parallel_chunks(modes.size(), 8, [&](std::size_t b, std::size_t e, std::size_t) {
        for (std::size_t i = b; i < e; ++i) {
            const Mode4& md = modes[i];
            const residue u = canonical(md.m + mul_mod(a, md.mp, q), q);
            const residue v = canonical(md.n + mul_mod(abar, md.np, q), q);
            MixingModeValue mv;
            mv.mode = md;
            mv.value = kloosterman(u, v, units, roots) / static_cast<double>(mod.phi());
            mv.bound = weil_rhs(u, v, mod) / static_cast<double>(mod.phi());
            mv.degenerate = u == 0 && v == 0;
            r.modes[i] = mv;
        }
    });
    for (const auto& mv : r.modes) {
        if (mv.degenerate) {
            ++r.degenerate_count;
        } else {
            r.max_abs_nondegenerate = std::max(r.max_abs_nondegenerate, std::abs(mv.value));
        }
    }
    return r;
}

} // namespace modtorus
