#pragma once

/**
 * @file kernels.hpp
 * @brief Fourier coefficients of the ball indicator and its mollified
 * upper/lower kernels, with certified truncation of the lattice sums.
 *
 * Coefficients are magnitudes only; a center y contributes the phase
 * e(-k . y), which callers apply.
 *
 *   hard ball      K(k) = R J1(2 pi R |k|) / |k|,                  K(0) = pi R^2
 *   mollified      K(k) = (R' / (pi rho)) J1(2 pi R' |k|) J1(2 pi rho |k|) / |k|^2,
 *                  R' = R + sign rho,                              K(0) = pi R'^2
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "modtorus/bessel.hpp"
#include "modtorus/error.hpp"
#include "modtorus/parallel.hpp"

namespace modtorus {

struct LatticeMode {
    std::int64_t m = 0;
    std::int64_t n = 0;

    double norm() const noexcept { return std::hypot(static_cast<double>(m), static_cast<double>(n)); }
    std::int64_t norm_sq() const noexcept { return m * m + n * n; }
};

/// A ball of radius R, optionally mollified by a normalized rho-ball.
/// sign = 0 is the hard indicator; +1 and -1 select the upper and lower
/// mollified kernels built from radius R + sign * rho.
struct KernelSpec {
    double R = 0.0;
    double rho = 0.0;
    int sign = 0;

    static KernelSpec hard(double R) { return {R, 0.0, 0}; }
    static KernelSpec mollified(double R, double rho, int sign) { return {R, rho, sign}; }

    bool is_mollified() const noexcept { return sign != 0; }
    double outer_radius() const noexcept { return R + sign * rho; }

    void validate() const {
        require(std::isfinite(R) && R > 0.0 && R < 0.5, errc::invalid_argument,
                "kernel radius must lie in (0, 1/2), got " + std::to_string(R));
        if (sign == 0) return;
        require(sign == 1 || sign == -1, errc::invalid_argument, "kernel sign must be +1 or -1");
        require(std::isfinite(rho) && rho > 0.0 && rho < R, errc::invalid_argument,
                "mollifier width must satisfy 0 < rho < R");
        require(sign < 0 || R + rho < 0.5, errc::invalid_argument, "upper kernel needs R + rho < 1/2");
    }
};

/// Default mollifier width at modulus q: R^(-1/3) q^(-1/3) for
/// R > q^(-1/4), else R / 2.
inline double default_mollifier_width(double R, std::int64_t q) {
    require(std::isfinite(R) && R > 0.0, errc::invalid_argument, "radius must be positive");
    require(q >= 1, errc::invalid_argument, "modulus must be >= 1");
    const double qd = static_cast<double>(q);
    if (R > std::pow(qd, -0.25)) return std::cbrt(1.0 / (R * qd));
    return R / 2.0;
}

inline double hard_ball_fourier(double R, LatticeMode k) {
    KernelSpec::hard(R).validate();
    if (k.m == 0 && k.n == 0) return std::numbers::pi * R * R;
    const double r = k.norm();
    return R * bessel_j1(2.0 * std::numbers::pi * R * r) / r;
}

inline double mollified_fourier(const KernelSpec& spec, LatticeMode k) {
    spec.validate();
    require(spec.is_mollified(), errc::invalid_argument, "mollified_fourier needs sign +1 or -1");
    const double Rp = spec.outer_radius();
    if (k.m == 0 && k.n == 0) return std::numbers::pi * Rp * Rp;
    const double r = k.norm();
    const double tp = 2.0 * std::numbers::pi * r;
    return Rp / (std::numbers::pi * spec.rho) * bessel_j1(tp * Rp) * bessel_j1(tp * spec.rho) / (r * r);
}

/// Fourier coefficient of the normalized rho-ball, J1(2 pi rho r) / (pi rho r);
/// mollified_fourier is hard_ball_fourier(R') times this factor.
inline double mollifier_factor(double rho, LatticeMode k) {
    if (k.m == 0 && k.n == 0) return 1.0;
    const double r = k.norm();
    return bessel_j1(2.0 * std::numbers::pi * rho * r) / (std::numbers::pi * rho * r);
}

// -----------------------------------------------------------------------------
// Lattice tails
// -----------------------------------------------------------------------------

/// Upper bound for the sum of |k|^-p over k in Z^2 with |k| > X, p > 2.
///
/// Each lattice point owns the unit square around it; on that square
/// |k| >= |y| - c with c = sqrt(2)/2, and the squares lie outside the disc
/// of radius X - c. Integrating (|y| - c)^-p over that region gives
///   2 pi [ (X - 2c)^(2-p) / (p - 2) + c (X - 2c)^(1-p) / (p - 1) ].
/// Points with |k| <= 4 are summed exactly so small X stays sharp.
inline double lattice_tail(double p, double X) {
    require(p > 2.0, errc::invalid_argument, "lattice tail needs exponent p > 2");
    constexpr double c = std::numbers::sqrt2 / 2.0;
    constexpr double X0 = 4.0;
    double exact = 0.0;
    const double from = std::max(X, 0.0);
    if (from < X0) {
        for (int m = -4; m <= 4; ++m) {
            for (int n = -4; n <= 4; ++n) {
                const double r = std::hypot(m, n);
                if (r > from && r <= X0) exact += std::pow(r, -p);
            }
        }
    }
    const double Y = std::max(from, X0) - 2.0 * c;
    return exact + 2.0 * std::numbers::pi * (std::pow(Y, 2.0 - p) / (p - 2.0) + c * std::pow(Y, 1.0 - p) / (p - 1.0));
}

enum class CoefficientKind {
    hard,          // R J1(2 pi R r) / r; not absolutely summable
    hard_squared,  // its square, the Parseval / variance weight
    mollified,     // the absolutely convergent mollified coefficient
};

inline const char* to_string(CoefficientKind k) {
    switch (k) {
    case CoefficientKind::hard: return "hard";
    case CoefficientKind::hard_squared: return "hard-squared";
    case CoefficientKind::mollified: return "mollified";
    }
    return "unknown";
}

/// Certified bound on the sum of |coefficient| over modes with |k| > T.
inline double spectrum_tail_bound(const KernelSpec& spec, CoefficientKind kind, double T) {
    spec.validate();
    const double two_pi = 2.0 * std::numbers::pi;
    switch (kind) {
    case CoefficientKind::hard:
        fail(errc::invalid_argument, "the hard-ball coefficients are not absolutely summable; use hard_squared");
    case CoefficientKind::hard_squared: {
        // R^2 J1(x)^2 / r^2 <= R^2 (c / x) / r^2 = (R c / 2 pi) r^-3, x = 2 pi R r.
        const double c = j1_squared_envelope(two_pi * spec.R * T);
        return spec.R * c / two_pi * lattice_tail(3.0, T);
    }
    case CoefficientKind::mollified: {
        require(spec.is_mollified(), errc::invalid_argument, "mollified tail needs a mollified spec");
        // |J1(x)| <= 1/sqrt(x) on both factors.
        const double Rp = spec.outer_radius();
        const double amp = Rp / (std::numbers::pi * spec.rho) / (two_pi * std::sqrt(Rp * spec.rho));
        return amp * lattice_tail(3.0, T);
    }
    }
    return 0.0;
}

inline constexpr double default_cutoff_cap = 1e7;
inline constexpr std::size_t default_materialize_cap = 4'000'000;

struct CertifiedCutoff {
    double T = 0.0;
    double tail_bound = 0.0;
};

/// Smallest cutoff (to relative precision 1e-6) at which a decreasing
/// tail bound falls below epsilon.
template <class Tail>
CertifiedCutoff solve_cutoff(Tail&& tail, double epsilon, double cap = default_cutoff_cap) {
    require(epsilon > 0.0 && std::isfinite(epsilon), errc::invalid_argument, "epsilon must be positive");
    double hi = 4.0;
    while (tail(hi) >= epsilon) {
        hi *= 2.0;
        require(hi <= 2.0 * cap, errc::resource_limit,
                "certified cutoff for epsilon = " + std::to_string(epsilon) + " exceeds the cap");
    }
    double lo = hi / 2.0;
    if (tail(lo) < epsilon) lo = 0.0;
    while (hi - lo > 1e-6 * hi) {
        const double mid = 0.5 * (lo + hi);
        (tail(mid) < epsilon ? hi : lo) = mid;
    }
    require(hi <= cap, errc::resource_limit, "certified cutoff T = " + std::to_string(hi) + " exceeds the cap");
    return {hi, tail(hi)};
}

inline CertifiedCutoff certified_cutoff(const KernelSpec& spec, CoefficientKind kind, double epsilon,
                                        double cap = default_cutoff_cap) {
    spec.validate();
    return solve_cutoff([&](double T) { return spectrum_tail_bound(spec, kind, T); }, epsilon, cap);
}

/// Visits every nonzero mode with |k| <= T in order of m then n.
template <class F>
void for_each_mode(double T, F&& f) {
    const auto t = static_cast<std::int64_t>(std::floor(T));
    const double T2 = T * T;
    for (std::int64_t m = -t; m <= t; ++m) {
        for (std::int64_t n = -t; n <= t; ++n) {
            if (m == 0 && n == 0) continue;
            if (static_cast<double>(m * m + n * n) <= T2) f(LatticeMode{m, n});
        }
    }
}

struct SpectrumEntry {
    LatticeMode mode;
    double value;
};

/// A finite Fourier expansion with a certified bound on what was dropped.
struct TruncatedSpectrum {
    KernelSpec spec;
    CoefficientKind kind = CoefficientKind::mollified;
    double T = 0.0;
    double tail_bound = 0.0;
    double zero_mode = 0.0;
    std::vector<SpectrumEntry> coefficients;

    /// Reconstructs the kernel at displacement (dx, dy):
    /// K(0) + sum over stored modes of K(k) cos(2 pi k . d).
    double evaluate(double dx, double dy) const {
        compensated_sum acc;
        acc.add(zero_mode);
        for (const auto& e : coefficients) {
            const double phase = static_cast<double>(e.mode.m) * dx + static_cast<double>(e.mode.n) * dy;
            acc.add(e.value * std::cos(2.0 * std::numbers::pi * (phase - std::round(phase))));
        }
        return acc.value();
    }

    double sum_abs() const {
        compensated_sum acc;
        for (const auto& e : coefficients) acc.add(std::abs(e.value));
        return acc.value();
    }
};

inline double spectrum_coefficient(const KernelSpec& spec, CoefficientKind kind, LatticeMode k) {
    switch (kind) {
    case CoefficientKind::hard: return hard_ball_fourier(spec.R, k);
    case CoefficientKind::hard_squared: {
        const double v = hard_ball_fourier(spec.R, k);
        return v * v;
    }
    case CoefficientKind::mollified: return mollified_fourier(spec, k);
    }
    return 0.0;
}

/// Chooses T with certified tail < epsilon and stores every coefficient
/// with 0 < |k| <= T.
inline TruncatedSpectrum truncation_cutoff(const KernelSpec& spec, CoefficientKind kind, double epsilon,
                                           double cap = default_cutoff_cap,
                                           std::size_t materialize_cap = default_materialize_cap) {
    const auto cut = certified_cutoff(spec, kind, epsilon, cap);
    const double estimate = std::numbers::pi * (cut.T + 1.0) * (cut.T + 1.0);
    require(estimate <= static_cast<double>(materialize_cap), errc::resource_limit,
            "spectrum with T = " + std::to_string(cut.T) + " has too many modes to store; stream it instead");
    TruncatedSpectrum s{spec, kind, cut.T, cut.tail_bound, spectrum_coefficient(spec, kind, {0, 0}), {}};
    for_each_mode(cut.T, [&](LatticeMode k) { s.coefficients.push_back({k, spectrum_coefficient(spec, kind, k)}); });
    return s;
}

inline TruncatedSpectrum truncation_cutoff(double R, CoefficientKind kind, double epsilon) {
    return truncation_cutoff(KernelSpec::hard(R), kind, epsilon);
}

// -----------------------------------------------------------------------------
// Radial lattice sums of J1^2 / r^2
// -----------------------------------------------------------------------------

namespace detail {

inline std::int64_t isqrt_floor(std::int64_t v) {
    if (v <= 0) return 0;
    auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(v)));
    while (r * r > v) --r;
    while ((r + 1) * (r + 1) <= v) ++r;
    return r;
}

inline double j1sq_over_r2_scalar(double k, std::int64_t m, std::int64_t n) {
    const double r2 = static_cast<double>(m * m + n * n);
    const double j = bessel_j1(k * std::sqrt(r2));
    return j * j / r2;
}

} // namespace detail

/// Sum of J1(k r)^2 / r^2 over all nonzero lattice modes with
/// A^2 < r^2 <= B^2, where A2 and B2 are integers. Uses the eightfold
/// symmetry of the weight: the octant 0 <= n <= m carries weight 8 in its
/// interior and 4 on the rays n = 0 and n = m.
inline double radial_j1sq_annulus(double k, std::int64_t A2, std::int64_t B2) {
    if (B2 <= A2) return 0.0;
    // In the octant r <= m sqrt(2), so rows below sqrt(A2 / 2) lie inside the inner circle.
    const std::int64_t m_max = detail::isqrt_floor(B2);
    const std::int64_t m_min = std::max<std::int64_t>(1, detail::isqrt_floor(A2 / 2));
    const std::size_t rows = static_cast<std::size_t>(m_max - m_min + 1);
    return parallel_reduce(
               rows, 256, compensated_sum{},
               [&](std::size_t b, std::size_t e) {
                   compensated_sum acc;
                   for (std::size_t row = b; row < e; ++row) {
                       const auto m = static_cast<std::int64_t>(row) + m_min;
                       // n in [n_lo, n_hi] with A2 < m^2 + n^2 <= B2 and 0 <= n <= m.
                       const std::int64_t n_hi = std::min(m, detail::isqrt_floor(B2 - m * m));
                       std::int64_t n_lo = 0;
                       if (A2 - m * m >= 0) n_lo = detail::isqrt_floor(A2 - m * m) + 1;
                       if (n_lo > n_hi) continue;
                       auto term = [&](std::int64_t n) { return detail::j1sq_over_r2_scalar(k, m, n); };
                       if (n_lo == 0) acc.add(4.0 * term(0));
                       if (n_hi == m) acc.add(4.0 * term(m));
                       const std::int64_t i0 = std::max<std::int64_t>(n_lo, 1);
                       const std::int64_t i1 = std::min(n_hi, m - 1);
                       if (i0 > i1) continue;
                       if (k * static_cast<double>(m) >= fast_j1_threshold) {
                           acc.add(8.0 * sum_j1sq_over_r2_row(k, m, i0, i1));
                       } else {
                           compensated_sum row_acc;
                           for (std::int64_t n = i0; n <= i1; ++n) row_acc.add(term(n));
                           acc.add(8.0 * row_acc.value());
                       }
                   }
                   return acc;
               },
               [](compensated_sum& a, const compensated_sum& p) { a.merge(p); })
        .value();
}

struct ParsevalResult {
    double R = 0.0;
    double epsilon = 0.0;
    double target = 0.0;       // pi R^2 - (pi R^2)^2
    double partial_sum = 0.0;  // sum of squared coefficients with 0 < |k| <= T
    double T = 0.0;
    double tail_bound = 0.0;
    double residual = 0.0;     // |partial_sum - target| + tail_bound
    bool early_exit = false;
};

/// Checks that the squared hard-ball coefficients sum to vol - vol^2.
///
/// The lattice is streamed in annuli out to the cutoff where the certified
/// tail drops below epsilon. Since the true tail is exactly target minus
/// the partial sum, the loop stops at the first annulus where
/// |partial - target| + tail(T) < 2 epsilon; that is the same residual the
/// full cutoff would report, attained at a smaller T.
inline ParsevalResult parseval_residual(double R, double epsilon, double cap = default_cutoff_cap) {
    const auto spec = KernelSpec::hard(R);
    spec.validate();
    const auto full = certified_cutoff(spec, CoefficientKind::hard_squared, epsilon, cap);
    const double vol = std::numbers::pi * R * R;
    const double k = 2.0 * std::numbers::pi * R;

    ParsevalResult out;
    out.R = R;
    out.epsilon = epsilon;
    out.target = vol - vol * vol;

    // Coarse geometric steps up to half the cutoff, then 1% steps.
    std::vector<double> checkpoints;
    for (double T = std::min(64.0, full.T); T < 0.5 * full.T; T *= 1.25) checkpoints.push_back(T);
    for (int i = 50; i <= 100; ++i) checkpoints.push_back(full.T * i / 100.0);

    compensated_sum acc;
    std::int64_t done = 0;
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        const double T = checkpoints[i];
        const auto B2 = static_cast<std::int64_t>(std::floor(T * T));
        acc.add(radial_j1sq_annulus(k, done, B2));
        done = B2;
        const double partial = R * R * acc.value();
        const double tail = spectrum_tail_bound(spec, CoefficientKind::hard_squared, T);
        const double residual = std::abs(partial - out.target) + tail;
        const bool last = i + 1 == checkpoints.size();
        if (residual < 2.0 * epsilon || last) {
            out.partial_sum = partial;
            out.T = T;
            out.tail_bound = tail;
            out.residual = residual;
            out.early_exit = !last;
            break;
        }
    }
    return out;
}

// -----------------------------------------------------------------------------
// Envelope self-check
// -----------------------------------------------------------------------------

struct EnvelopeCheck {
    std::size_t points = 0;
    std::size_t violations = 0;
    double worst_ratio = 0.0;  // max |J1(x)| / envelope(x)
    double worst_x = 0.0;
};

/// Verifies |J1(x)| <= min(x/2, 1/sqrt(x)) on a geometric grid of [lo, hi].
inline EnvelopeCheck check_j1_envelope(const std::function<double(double)>& j1 = bessel_j1, double lo = 1e-4,
                                       double hi = 1e6, std::size_t points = 2000) {
    EnvelopeCheck out;
    out.points = points;
    const double step = std::log(hi / lo) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) {
        const double x = lo * std::exp(step * static_cast<double>(i));
        const double ratio = std::abs(j1(x)) / j1_envelope(x);
        if (ratio > out.worst_ratio) {
            out.worst_ratio = ratio;
            out.worst_x = x;
        }
        if (ratio > 1.0) ++out.violations;
    }
    return out;
}

} // namespace modtorus
