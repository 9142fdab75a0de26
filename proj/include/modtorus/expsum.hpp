#pragma once

/**
 * @file expsum.hpp
 * @brief Kloosterman sums (plain, batched, twisted), coset Weyl sums and
 * the Fourier coefficients of the multiplicative-translate measure.
 *
 * Here e(x) = exp(2 pi i x) and S(m, n; q) = sum over units d of
 * e((m d + n dbar) / q).
 */

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "modtorus/arith.hpp"
#include "modtorus/error.hpp"
#include "modtorus/parallel.hpp"

namespace modtorus {

/// cos and sin of 2 pi k / q for k in [0, q).
class RootsOfUnity {
public:
    explicit RootsOfUnity(std::int64_t q) : q_(q), table_(static_cast<std::size_t>(q)) {
        for (std::int64_t k = 0; k < q; ++k) {
            // Fold onto [-q/2, q/2] so the angle passed to cos/sin stays small.
            const std::int64_t j = 2 * k > q ? k - q : k;
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(q);
            table_[static_cast<std::size_t>(k)] = {std::cos(angle), std::sin(angle)};
        }
    }

    std::complex<double> operator()(residue k) const { return table_[static_cast<std::size_t>(canonical(k, q_))]; }
    std::complex<double> at(std::size_t k) const { return table_[k]; }

private:
    std::int64_t q_;
    std::vector<std::complex<double>> table_;
};

namespace detail {

inline void check_real(std::complex<double> z, std::int64_t phi) {
    if (!(std::abs(z.imag()) <= 1e-9 * static_cast<double>(std::max<std::int64_t>(phi, 1)))) {
        throw std::logic_error("Kloosterman sum has a non-vanishing imaginary part: " + std::to_string(z.imag()));
    }
}

} // namespace detail

/// Direct summation of S(m, n; q) with compensated accumulation.
inline double kloosterman(residue m, residue n, const UnitGroupView& units, const RootsOfUnity& roots) {
    const std::int64_t q = units.modulus.value();
    const residue mr = canonical(m, q), nr = canonical(n, q);
    compensated_complex_sum acc;
    for (residue d : units.units) {
        const residue k = (mul_mod(mr, d, q) + mul_mod(nr, units.inverse_table[static_cast<std::size_t>(d)], q)) % q;
        acc.add(roots(k));
    }
    const auto z = acc.value();
    detail::check_real(z, units.modulus.phi());
    return z.real();
}

inline double kloosterman(residue m, residue n, const UnitGroupView& units) {
    return kloosterman(m, n, units, RootsOfUnity(units.modulus.value()));
}

inline double kloosterman(residue m, residue n, const Modulus& mod) { return kloosterman(m, n, unit_group(mod)); }

/// tau(q) * sqrt(gcd(m, n, q) * q).
inline double weil_rhs(residue m, residue n, const Modulus& mod) {
    const double g = static_cast<double>(gcd3(m, n, mod.value()));
    return static_cast<double>(mod.tau()) * std::sqrt(g * static_cast<double>(mod.value()));
}

// -----------------------------------------------------------------------------
// Batched evaluation through FFTW
// -----------------------------------------------------------------------------

namespace detail {

// FFTW's planner is not re-entrant; execution on distinct buffers is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct fftw_buffer {
    fftw_complex* data = nullptr;
    explicit fftw_buffer(std::size_t n) : data(fftw_alloc_complex(n)) {
        if (data == nullptr) throw std::bad_alloc();
    }
    ~fftw_buffer() { fftw_free(data); }
    fftw_buffer(const fftw_buffer&) = delete;
    fftw_buffer& operator=(const fftw_buffer&) = delete;
};

/// A length-q backward transform, out[n] = sum_b in[b] e(n b / q).
class backward_dft {
public:
    explicit backward_dft(std::int64_t q) : q_(q) {
        fftw_buffer in(static_cast<std::size_t>(q)), out(static_cast<std::size_t>(q));
        std::lock_guard lock(fftw_planner_mutex());
        plan_ = fftw_plan_dft_1d(static_cast<int>(q), in.data, out.data, FFTW_BACKWARD, FFTW_ESTIMATE);
        if (plan_ == nullptr) throw std::runtime_error("FFTW planning failed");
    }
    ~backward_dft() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
    }
    backward_dft(const backward_dft&) = delete;
    backward_dft& operator=(const backward_dft&) = delete;

    /// Buffers must come from fftw_alloc_complex so their alignment
    /// matches the plan.
    void execute(fftw_complex* in, fftw_complex* out) const { fftw_execute_dft(plan_, in, out); }

    std::int64_t size() const noexcept { return q_; }

private:
    std::int64_t q_;
    fftw_plan plan_ = nullptr;
};

} // namespace detail

/// All S(m, n; q) for (m, n) in [0, q)^2, stored row-major by m.
class KloostermanTable {
public:
    KloostermanTable(Modulus mod, std::vector<double> values) : modulus_(std::move(mod)), values_(std::move(values)) {}

    const Modulus& modulus() const noexcept { return modulus_; }
    std::int64_t q() const noexcept { return modulus_.value(); }

    double operator()(residue m, residue n) const {
        const std::int64_t q = modulus_.value();
        return values_[static_cast<std::size_t>(canonical(m, q) * q + canonical(n, q))];
    }

    /// Unchecked access for m, n already in [0, q).
    double at(std::size_t m, std::size_t n) const noexcept {
        return values_[m * static_cast<std::size_t>(modulus_.value()) + n];
    }

    const std::vector<double>& values() const noexcept { return values_; }

private:
    Modulus modulus_;
    std::vector<double> values_;
};

inline constexpr std::int64_t default_table_cap = 5000;

/// Builds the table one row at a time: row m is the backward DFT of
/// b -> e(m bbar / q) supported on the units.
inline KloostermanTable kloosterman_table(const Modulus& mod, std::int64_t cap = default_table_cap) {
    const std::int64_t q = mod.value();
    require(q <= cap, errc::resource_limit,
            "Kloosterman table for q = " + std::to_string(q) + " exceeds the cap " + std::to_string(cap));
    const auto units = unit_group(mod);
    const RootsOfUnity roots(q);
    const detail::backward_dft dft(q);
    const std::size_t qs = static_cast<std::size_t>(q);
    std::vector<double> values(qs * qs);

    parallel_chunks(qs, 16, [&](std::size_t begin, std::size_t end, std::size_t) {
        detail::fftw_buffer in(qs), out(qs);
        for (std::size_t m = begin; m < end; ++m) {
            for (std::size_t b = 0; b < qs; ++b) in.data[b][0] = in.data[b][1] = 0.0;
            for (residue b : units.units) {
                const auto z = roots(mul_mod(static_cast<residue>(m), units.inverse_table[static_cast<std::size_t>(b)], q));
                in.data[b][0] = z.real();
                in.data[b][1] = z.imag();
            }
            dft.execute(in.data, out.data);
            for (std::size_t n = 0; n < qs; ++n) {
                detail::check_real({out.data[n][0], out.data[n][1]}, mod.phi());
                values[m * qs + n] = out.data[n][0];
            }
        }
    });
    return KloostermanTable(mod, std::move(values));
}

// -----------------------------------------------------------------------------
// Twisted sums
// -----------------------------------------------------------------------------

/// S_chi(m, n; q) = sum over units d of chi(d) e((m d + n dbar) / q), directly.
inline std::complex<double> twisted_kloosterman(const DirichletCharacter& chi, residue m, residue n,
                                                const UnitGroupView& units, const RootsOfUnity& roots) {
    const std::int64_t q = units.modulus.value();
    require(chi.modulus() == units.modulus, errc::invalid_argument, "character modulus does not match");
    const residue mr = canonical(m, q), nr = canonical(n, q);
    compensated_complex_sum acc;
    for (residue d : units.units) {
        const residue k = (mul_mod(mr, d, q) + mul_mod(nr, units.inverse_table[static_cast<std::size_t>(d)], q)) % q;
        acc.add(chi(d) * roots(k));
    }
    return acc.value();
}

inline std::complex<double> twisted_kloosterman(const DirichletCharacter& chi, residue m, residue n, const Modulus& mod) {
    return twisted_kloosterman(chi, m, n, unit_group(mod), RootsOfUnity(mod.value()));
}

/// Row m of the twisted table, S_chi(m, n; q) for n in [0, q), via one DFT.
class TwistedRowEvaluator {
public:
    explicit TwistedRowEvaluator(const UnitGroupView& units)
        : units_(units), roots_(units.modulus.value()), dft_(units.modulus.value()),
          in_(static_cast<std::size_t>(units.modulus.value())), out_(static_cast<std::size_t>(units.modulus.value())) {}

    void row(const DirichletCharacter& chi, residue m, std::vector<std::complex<double>>& result) {
        const std::int64_t q = units_.modulus.value();
        const std::size_t qs = static_cast<std::size_t>(q);
        for (std::size_t b = 0; b < qs; ++b) in_.data[b][0] = in_.data[b][1] = 0.0;
        for (residue b : units_.units) {
            // Substituting b = dbar turns chi(d) into conj(chi(b)).
            const auto z = std::conj(chi(b)) * roots_(mul_mod(m, units_.inverse_table[static_cast<std::size_t>(b)], q));
            in_.data[b][0] = z.real();
            in_.data[b][1] = z.imag();
        }
        dft_.execute(in_.data, out_.data);
        result.resize(qs);
        for (std::size_t n = 0; n < qs; ++n) result[n] = {out_.data[n][0], out_.data[n][1]};
    }

private:
    const UnitGroupView& units_;
    RootsOfUnity roots_;
    detail::backward_dft dft_;
    detail::fftw_buffer in_, out_;
};

// -----------------------------------------------------------------------------
// Coset Weyl sums
// -----------------------------------------------------------------------------

/// (1/#H) sum over d in aH of e((m d + n dbar) / q), directly.
inline std::complex<double> coset_weyl_sum(const SubgroupCoset& coset, residue m, residue n) {
    const std::int64_t q = coset.modulus.value();
    const RootsOfUnity roots(q);
    compensated_complex_sum acc;
    for (residue d : coset.elements) {
        const residue k = (mul_mod(m, d, q) + mul_mod(n, mod_inverse(d, coset.modulus), q)) % q;
        acc.add(roots(k));
    }
    return acc.value() / static_cast<double>(coset.elements.size());
}

/// The same quantity through character orthogonality:
/// (1/phi(q)) sum over chi trivial on H of conj(chi(a)) S_chi(m, n; q).
inline std::complex<double> coset_weyl_sum_by_characters(const SubgroupCoset& coset, residue m, residue n,
                                                         const CharacterGroup& group) {
    require(group.modulus() == coset.modulus, errc::invalid_argument, "character group modulus does not match");
    const auto units = unit_group(coset.modulus);
    const RootsOfUnity roots(coset.modulus.value());
    compensated_complex_sum acc;
    for (const auto& chi : group.all()) {
        if (!is_trivial_on(chi, coset)) continue;
        acc.add(std::conj(chi(coset.representative)) * twisted_kloosterman(chi, m, n, units, roots));
    }
    return acc.value() / static_cast<double>(coset.modulus.phi());
}

// -----------------------------------------------------------------------------
// Mixing
// -----------------------------------------------------------------------------

struct Mode4 {
    std::int64_t m = 0, n = 0, mp = 0, np = 0;

    bool operator==(const Mode4&) const = default;
};

/// Fourier coefficient of the measure on T^4 carried by
/// (d, dbar, a d, abar dbar) / q at the given mode:
/// S(m + a m', n + abar n'; q) / phi(q).
inline double mixing_fourier(residue a, const Mode4& mode, const UnitGroupView& units, const RootsOfUnity& roots) {
    const Modulus& mod = units.modulus;
    const std::int64_t q = mod.value();
    const residue abar = mod_inverse(a, mod);
    const residue u = canonical(canonical(mode.m, q) + mul_mod(a, mode.mp, q), q);
    const residue v = canonical(canonical(mode.n, q) + mul_mod(abar, mode.np, q), q);
    return kloosterman(u, v, units, roots) / static_cast<double>(mod.phi());
}

inline double mixing_fourier(residue a, const Mode4& mode, const Modulus& mod) {
    const auto units = unit_group(mod);
    return mixing_fourier(a, mode, units, RootsOfUnity(mod.value()));
}

/// Weyl sum of the same measure evaluated point by point.
inline std::complex<double> mixing_fourier_direct(residue a, const Mode4& mode, const Modulus& mod) {
    const std::int64_t q = mod.value();
    const residue abar = mod_inverse(a, mod);
    const auto units = unit_group(mod);
    const RootsOfUnity roots(q);
    compensated_complex_sum acc;
    for (residue d : units.units) {
        const residue dbar = units.inverse_table[static_cast<std::size_t>(d)];
        const residue x3 = mul_mod(a, d, q);
        const residue x4 = mul_mod(abar, dbar, q);
        const residue k = canonical(mul_mod(mode.m, d, q) + mul_mod(mode.n, dbar, q) + mul_mod(mode.mp, x3, q) +
                                        mul_mod(mode.np, x4, q),
                                    q);
        acc.add(roots(k));
    }
    return acc.value() / static_cast<double>(mod.phi());
}

/// True when the mode collapses to the zero frequency, so the coefficient is 1.
inline bool mixing_mode_degenerate(residue a, const Mode4& mode, const Modulus& mod) {
    const std::int64_t q = mod.value();
    const residue abar = mod_inverse(a, mod);
    return canonical(mode.m + mul_mod(a, mode.mp, q), q) == 0 && canonical(mode.n + mul_mod(abar, mode.np, q), q) == 0;
}

// -----------------------------------------------------------------------------
// Bourgain's hypotheses and the pair count
// -----------------------------------------------------------------------------

struct BourgainConditionReport {
    std::int64_t q = 0;
    std::int64_t subgroup_order = 0;
    std::int64_t k1 = 0, k2 = 0;
    std::int64_t gcd_k1 = 0, gcd_k2 = 0, gcd_diff = 0;
    std::int64_t expected_gcd = 0;  // (q - 1) / #H
    std::int64_t diff_bound = 0;    // 2 (q - 1) / #H
    double delta = 0.0;
    bool gcd_conditions = false;
    bool size_condition = false;    // #H >= q^delta

    bool passed() const noexcept { return gcd_conditions && size_condition; }
};

inline BourgainConditionReport bourgain_condition(std::int64_t subgroup_order, const Modulus& mod, double delta) {
    require(mod.is_prime(), errc::unsupported_modulus, "Bourgain conditions are checked for prime moduli only");
    require(delta > 0.0, errc::invalid_argument, "delta must be positive");
    const std::int64_t p1 = mod.value() - 1;
    require(subgroup_order >= 1 && p1 % subgroup_order == 0, errc::invalid_index,
            std::to_string(subgroup_order) + " does not divide q - 1 = " + std::to_string(p1));
    BourgainConditionReport r;
    r.q = mod.value();
    r.subgroup_order = subgroup_order;
    r.delta = delta;
    r.k1 = p1 / subgroup_order;
    r.k2 = p1 * (subgroup_order - 1) / subgroup_order;
    r.gcd_k1 = std::gcd(r.k1, p1);
    r.gcd_k2 = std::gcd(r.k2, p1);
    r.gcd_diff = std::gcd(r.k1 - r.k2 < 0 ? r.k2 - r.k1 : r.k1 - r.k2, p1);
    r.expected_gcd = r.k1;
    r.diff_bound = 2 * r.k1;
    r.gcd_conditions = r.gcd_k1 == r.expected_gcd && r.gcd_k2 == r.expected_gcd && r.gcd_diff <= r.diff_bound;
    r.size_condition = static_cast<double>(subgroup_order) >= std::pow(static_cast<double>(r.q), delta);
    return r;
}

/// #{(d1, d2) units : d1 - d2 = c1, d1bar - d2bar = c2 (mod q)}.
inline std::int64_t pair_count(residue c1, residue c2, const UnitGroupView& units) {
    const std::int64_t q = units.modulus.value();
    const residue c1r = canonical(c1, q), c2r = canonical(c2, q);
    std::int64_t count = 0;
    for (residue d1 : units.units) {
        const residue d2 = canonical(d1 - c1r, q);
        const residue d2bar = units.inverse_table[static_cast<std::size_t>(d2)];
        if (d2bar < 0 && q > 1) continue;
        if (canonical(units.inverse_table[static_cast<std::size_t>(d1)] - d2bar, q) == c2r) ++count;
    }
    return count;
}

inline std::int64_t pair_count(residue c1, residue c2, const Modulus& mod) { return pair_count(c1, c2, unit_group(mod)); }

} // namespace modtorus
