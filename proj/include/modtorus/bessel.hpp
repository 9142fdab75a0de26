#pragma once

/**
 * @file bessel.hpp
 * @brief J0 and J1 on [0, 1e8], plus a vectorizable J1^2 kernel for
 * large arguments.
 *
 * Below x = 16 the power series is summed in long double. From 16 on the
 * Hankel expansion
 *
 *   J_nu(x) = sqrt(2 / (pi x)) (P cos(theta) - Q sin(theta)),
 *   theta = x - (2 nu + 1) pi / 4,
 *
 * is truncated at its smallest term, which is below 2e-15 at x = 16 and
 * shrinks quickly after that. The phase is assembled from cos x and sin x
 * so that the argument reduction is done once by the C library.
 */

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "modtorus/error.hpp"

namespace modtorus {

inline constexpr double bessel_max_argument = 1e8;
inline constexpr double bessel_series_limit = 16.0;

namespace detail {

inline void check_bessel_argument(double x) {
    require(std::isfinite(x) && x >= 0.0 && x <= bessel_max_argument, errc::invalid_argument,
            "Bessel argument must lie in [0, 1e8], got " + std::to_string(x));
}

inline long double bessel_series(int nu, long double x) {
    const long double h2 = x * x / 4.0L;
    long double term = nu == 0 ? 1.0L : x / 2.0L;
    long double sum = term;
    for (int k = 1; k < 200; ++k) {
        term *= -h2 / (static_cast<long double>(k) * static_cast<long double>(k + nu));
        sum += term;
        if (k > x && std::fabs(term) < 1e-21L) break;
    }
    return sum;
}

/// Hankel amplitudes P and Q, truncated just before the smallest term.
struct hankel_pq {
    long double p;
    long double q;
};

inline hankel_pq hankel_series(int nu, long double x) {
    const long double mu = 4.0L * nu * nu;
    long double p = 1.0L, q = 0.0L;
    long double term = 1.0L;  // a_k / x^k with the sign pattern folded in below
    long double previous = 1.0L;
    for (int k = 1; k < 60; ++k) {
        const long double odd = 2.0L * k - 1.0L;
        term *= (mu - odd * odd) / (8.0L * k * x);
        const long double mag = std::fabs(term);
        if (mag > previous || mag < 1e-22L) break;
        previous = mag;
        // P = sum (-1)^j a_{2j} / x^{2j},  Q = sum (-1)^j a_{2j+1} / x^{2j+1}
        const int j = k / 2;
        const long double signed_term = (j % 2 == 0) ? term : -term;
        if (k % 2 == 0) {
            p += signed_term;
        } else {
            q += signed_term;
        }
    }
    return {p, q};
}

inline long double bessel_asymptotic(int nu, long double x) {
    const auto [p, q] = hankel_series(nu, x);
    const long double c = std::cos(x), s = std::sin(x);
    const long double r2 = std::numbers::sqrt2_v<long double> / 2.0L;
    // nu = 0: theta = x - pi/4;  nu = 1: theta = x - 3pi/4.
    const long double cos_t = nu == 0 ? (c + s) * r2 : (s - c) * r2;
    const long double sin_t = nu == 0 ? (s - c) * r2 : -(s + c) * r2;
    return std::sqrt(2.0L / (std::numbers::pi_v<long double> * x)) * (p * cos_t - q * sin_t);
}

} // namespace detail

inline double bessel_j0(double x) {
    detail::check_bessel_argument(x);
    const long double xl = x;
    return static_cast<double>(x < bessel_series_limit ? detail::bessel_series(0, xl) : detail::bessel_asymptotic(0, xl));
}

inline double bessel_j1(double x) {
    detail::check_bessel_argument(x);
    const long double xl = x;
    return static_cast<double>(x < bessel_series_limit ? detail::bessel_series(1, xl) : detail::bessel_asymptotic(1, xl));
}

/// M_1(x)^2 = J_1(x)^2 + Y_1(x)^2 from the Hankel amplitudes, x >= 16.
inline double bessel_j1_modulus_sq(double x) {
    require(x >= bessel_series_limit, errc::invalid_argument, "modulus expansion needs x >= 16");
    const auto [p, q] = detail::hankel_series(1, x);
    return static_cast<double>(2.0L / (std::numbers::pi_v<long double> * x) * (p * p + q * q));
}

/// A constant c with J_1(x)^2 <= c / x for every x >= x0.
///
/// x M_1(x)^2 decreases monotonically towards 2/pi, so for x0 >= 16 the
/// value x0 M_1(x0)^2 works (with a small allowance for truncation of the
/// expansion). Below 16 the global bound |J_1(x)| <= 1/sqrt(x) gives c = 1.
inline double j1_squared_envelope(double x0) {
    if (!(x0 >= bessel_series_limit)) return 1.0;
    return x0 * bessel_j1_modulus_sq(x0) * (1.0 + 1e-10);
}

/// The pointwise envelope min(x / 2, 1 / sqrt(x)) for |J_1(x)|.
inline double j1_envelope(double x) { return x <= 0.0 ? 0.0 : std::min(x / 2.0, 1.0 / std::sqrt(x)); }

// -----------------------------------------------------------------------------
// Batched J1^2 / r^2 over lattice rows
// -----------------------------------------------------------------------------

/// Arguments below this go through bessel_j1; above it the fixed-length
/// expansion used by the batched kernel is accurate to about 1e-15 relative
/// to the amplitude at the rounded argument.
inline constexpr double fast_j1_threshold = 30.0;

namespace detail {

struct hankel_coefficients {
    std::array<double, 8> p{};  // P in powers of 1/x^2
    std::array<double, 7> q{};  // Q / (1/x) in powers of 1/x^2
};

constexpr hankel_coefficients make_hankel_coefficients() {
    hankel_coefficients c{};
    double a = 1.0;
    c.p[0] = 1.0;
    for (int k = 1; k <= 14; ++k) {
        const double odd = 2.0 * k - 1.0;
        a *= (4.0 - odd * odd) / (8.0 * k);
        const int j = k / 2;
        const double s = (j % 2 == 0) ? a : -a;
        if (k % 2 == 0) {
            c.p[static_cast<std::size_t>(j)] = s;
        } else {
            c.q[static_cast<std::size_t>(j)] = s;
        }
    }
    return c;
}

inline constexpr hankel_coefficients j1_hankel = make_hankel_coefficients();

/// J_1(x)^2 / r^2 for x = k r >= fast_j1_threshold, written so that loops
/// over it vectorize: the phase is reduced modulo pi/2 with a two-part
/// Cody-Waite constant and the rounding trick, then sin and cos come from
/// Taylor polynomials on [-pi/4, pi/4]. NP and NQ are the numbers of P and Q
/// terms kept.
template <int NP = 8, int NQ = 7>
[[gnu::always_inline]] inline double j1sq_over_r2_fast(double k, double inv_k, double r2) {
    constexpr double two_over_pi = 2.0 / std::numbers::pi;
    constexpr double pio2_hi = 1.5707963267948966;
    constexpr double pio2_lo = 6.123233995736766e-17;
    constexpr double round_magic = 6755399441055744.0;  // 1.5 * 2^52
    constexpr double three_pi_4 = 2.356194490192345;
    constexpr double three_pi_4_lo = 9.184850993605148e-17;
    const auto& P = j1_hankel.p;
    const auto& Q = j1_hankel.q;
    const double r = std::sqrt(r2);
    const double ir = 1.0 / r;
    const double x = k * r;
    const double inv_x = ir * inv_k;
    const double z = inv_x * inv_x;
    double p = P[NP - 1];
    for (int j = NP - 2; j >= 0; --j) p = P[static_cast<std::size_t>(j)] + z * p;
    double qq = Q[NQ - 1];
    for (int j = NQ - 2; j >= 0; --j) qq = Q[static_cast<std::size_t>(j)] + z * qq;
    qq *= inv_x;
    const double shifted = (x - three_pi_4) * two_over_pi + round_magic;
    const double kq = shifted - round_magic;
    // x - kq pi/2 is small, so 3 pi / 4 is taken off only afterwards.
    const double t = std::fma(-kq, pio2_lo, (std::fma(-kq, pio2_hi, x) - three_pi_4) - three_pi_4_lo);
    // The rounding constant is even with unit ulp, so the low mantissa bit
    // of the shifted value is the parity of the quadrant.
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(shifted);
    const double t2 = t * t;
    const double sn = t * (1.0 + t2 * (-1.0 / 6 + t2 * (1.0 / 120 + t2 * (-1.0 / 5040 + t2 * (1.0 / 362880 +
                      t2 * (-1.0 / 39916800 + t2 * (1.0 / 6227020800 + t2 * (-1.0 / 1307674368000))))))));
    const double cs = 1.0 + t2 * (-0.5 + t2 * (1.0 / 24 + t2 * (-1.0 / 720 + t2 * (1.0 / 40320 + t2 * (-1.0 / 3628800 +
                      t2 * (1.0 / 479001600 + t2 * (-1.0 / 87178291200 + t2 * (1.0 / 20922789888000))))))));
    const bool odd = (bits & 1u) != 0;
    const double c1 = odd ? -sn : cs;
    const double s1 = odd ? cs : sn;
    // Quadrants 2 and 3 flip both signs, which squaring removes.
    const double a = p * c1 - qq * s1;
    return two_over_pi * a * a * ir * ir * inv_x;
}

template <int NP, int NQ>
inline double sum_j1sq_over_r2_span(double k, double m2, std::int64_t n0, int count) {
    const double inv_k = 1.0 / k;
    const double base = static_cast<double>(n0);
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (int i = 0; i < count; ++i) {
        const double n = base + i;
        s += j1sq_over_r2_fast<NP, NQ>(k, inv_k, m2 + n * n);
    }
    return s;
}

} // namespace detail

/// Sum over n in [n0, n1] of J_1(k r)^2 / r^2 with r = sqrt(m^2 + n^2).
/// Every k r in the range must be >= fast_j1_threshold. Rows whose smallest
/// argument is large use fewer expansion terms; the dropped ones are below
/// 3e-18 of the amplitude.
inline double sum_j1sq_over_r2_row(double k, std::int64_t m, std::int64_t n0, std::int64_t n1) {
    if (n1 < n0) return 0.0;
    const double m2 = static_cast<double>(m) * static_cast<double>(m);
    const int count = static_cast<int>(n1 - n0 + 1);
    const double nmin = (n0 <= 0 && n1 >= 0) ? 0.0 : static_cast<double>(std::min(std::abs(n0), std::abs(n1)));
    const double xmin = k * std::sqrt(m2 + nmin * nmin);
    if (xmin >= 2000.0) return detail::sum_j1sq_over_r2_span<3, 3>(k, m2, n0, count);
    if (xmin >= 200.0) return detail::sum_j1sq_over_r2_span<4, 4>(k, m2, n0, count);
    return detail::sum_j1sq_over_r2_span<8, 7>(k, m2, n0, count);
}

/// out[i] = J_1(k r)^2 / r^2 at n = n0 + i for i < n1 - n0 + 1, same
/// precondition as sum_j1sq_over_r2_row.
inline void j1sq_over_r2_row(double k, std::int64_t m, std::int64_t n0, std::int64_t n1, double* out) {
    if (n1 < n0) return;
    const double m2 = static_cast<double>(m) * static_cast<double>(m);
    const double inv_k = 1.0 / k;
    const int count = static_cast<int>(n1 - n0 + 1);
    const double base = static_cast<double>(n0);
#pragma omp simd
    for (int i = 0; i < count; ++i) {
        const double n = base + i;
        out[i] = detail::j1sq_over_r2_fast(k, inv_k, m2 + n * n);
    }
}

} // namespace modtorus
