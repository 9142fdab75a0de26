#pragma once

/**
 * @file arith.hpp
 * @brief Integer and multiplicative-group arithmetic modulo q.
 *
 * Everything here is exact. Residues are canonicalized to [0, q) and
 * products are widened to 128 bits, so any q that fits in 62 bits is safe.
 * The objects are immutable once built and can be shared across threads.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "modtorus/error.hpp"

namespace modtorus {

using residue = std::int64_t;

struct prime_power {
    std::int64_t prime;
    int exponent;

    bool operator==(const prime_power&) const = default;
};

namespace detail {

inline std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
    return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

inline std::uint64_t powmod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
    if (m == 1) return 0;
    std::uint64_t result = 1;
    base %= m;
    while (exp > 0) {
        if (exp & 1) result = mulmod(result, base, m);
        base = mulmod(base, base, m);
        exp >>= 1;
    }
    return result;
}

// Deterministic Miller-Rabin; this base set is exact for all 64-bit inputs.
inline bool miller_rabin(std::uint64_t n) {
    if (n < 2) return false;
    for (std::uint64_t p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
        if (n % p == 0) return n == p;
    }
    std::uint64_t d = n - 1;
    int s = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++s;
    }
    for (std::uint64_t a : {2ull, 325ull, 9375ull, 28178ull, 450775ull, 9780504ull, 1795265022ull}) {
        std::uint64_t x = powmod(a % n, d, n);
        if (a % n == 0 || x == 1 || x == n - 1) continue;
        bool composite = true;
        for (int r = 1; r < s; ++r) {
            x = mulmod(x, x, n);
            if (x == n - 1) {
                composite = false;
                break;
            }
        }
        if (composite) return false;
    }
    return true;
}

// Brent's variant of Pollard rho. The polynomial constants are tried in a
// fixed order starting at c = 1, so the split found is reproducible.
inline std::uint64_t pollard_rho(std::uint64_t n) {
    if (n % 2 == 0) return 2;
    for (std::uint64_t c = 1;; ++c) {
        auto f = [&](std::uint64_t x) { return (mulmod(x, x, n) + c) % n; };
        std::uint64_t y = 2, x = 2, g = 1, q = 1, ys = 2;
        std::uint64_t r = 1;
        const std::uint64_t m = 128;
        do {
            x = y;
            for (std::uint64_t i = 0; i < r; ++i) y = f(y);
            std::uint64_t k = 0;
            do {
                ys = y;
                for (std::uint64_t i = 0; i < std::min(m, r - k); ++i) {
                    y = f(y);
                    q = mulmod(q, x > y ? x - y : y - x, n);
                }
                g = std::gcd(q, n);
                k += m;
            } while (k < r && g == 1);
            r *= 2;
        } while (g == 1);
        if (g == n) {
            do {
                ys = f(ys);
                g = std::gcd(x > ys ? x - ys : ys - x, n);
            } while (g == 1);
        }
        if (g != n) return g;
    }
}

inline void factor_into(std::uint64_t n, std::vector<std::uint64_t>& primes) {
    if (n == 1) return;
    if (miller_rabin(n)) {
        primes.push_back(n);
        return;
    }
    std::uint64_t d = pollard_rho(n);
    factor_into(d, primes);
    factor_into(n / d, primes);
}

inline std::vector<prime_power> factorize(std::uint64_t n) {
    std::vector<std::uint64_t> primes;
    constexpr std::uint64_t trial_limit = 1'000'000;
    for (std::uint64_t p = 2; p <= trial_limit && p * p <= n; p += (p == 2 ? 1 : 2)) {
        while (n % p == 0) {
            primes.push_back(p);
            n /= p;
        }
    }
    if (n > 1) factor_into(n, primes);
    std::sort(primes.begin(), primes.end());
    std::vector<prime_power> out;
    for (std::uint64_t p : primes) {
        if (!out.empty() && out.back().prime == static_cast<std::int64_t>(p)) {
            ++out.back().exponent;
        } else {
            out.push_back({static_cast<std::int64_t>(p), 1});
        }
    }
    return out;
}

inline std::int64_t ipow(std::int64_t base, int exp) {
    std::int64_t r = 1;
    while (exp-- > 0) r *= base;
    return r;
}

} // namespace detail

inline residue canonical(residue x, std::int64_t q) {
    residue r = x % q;
    return r < 0 ? r + q : r;
}

inline bool is_prime(std::int64_t n) { return n > 1 && detail::miller_rabin(static_cast<std::uint64_t>(n)); }

/// The `count` smallest primes that are >= lo.
inline std::vector<std::int64_t> primes_from(std::int64_t lo, std::size_t count) {
    std::vector<std::int64_t> out;
    for (std::int64_t n = std::max<std::int64_t>(lo, 2); out.size() < count; ++n) {
        if (is_prime(n)) out.push_back(n);
    }
    return out;
}

inline std::vector<std::int64_t> primes_between(std::int64_t lo, std::int64_t hi) {
    std::vector<std::int64_t> out;
    for (std::int64_t n = std::max<std::int64_t>(lo, 2); n <= hi; ++n) {
        if (is_prime(n)) out.push_back(n);
    }
    return out;
}

/// A positive modulus with its factorization and the multiplicative
/// functions derived from it.
class Modulus {
public:
    std::int64_t value() const noexcept { return q_; }
    const std::vector<prime_power>& factors() const noexcept { return factors_; }
    std::int64_t phi() const noexcept { return phi_; }
    std::int64_t tau() const noexcept { return tau_; }
    bool is_prime() const noexcept { return factors_.size() == 1 && factors_[0].exponent == 1; }
    bool is_cubefree() const noexcept {
        return std::all_of(factors_.begin(), factors_.end(), [](const prime_power& f) { return f.exponent <= 2; });
    }

    bool operator==(const Modulus& other) const noexcept { return q_ == other.q_; }

    friend Modulus make_modulus(std::int64_t q);

private:
    Modulus() = default;

    std::int64_t q_ = 1;
    std::vector<prime_power> factors_;
    std::int64_t phi_ = 1;
    std::int64_t tau_ = 1;
};

inline Modulus make_modulus(std::int64_t q) {
    require(q >= 1, errc::invalid_argument, "modulus must be positive, got " + std::to_string(q));
    Modulus m;
    m.q_ = q;
    m.factors_ = detail::factorize(static_cast<std::uint64_t>(q));
    for (const auto& [p, e] : m.factors_) {
        m.phi_ *= detail::ipow(p, e - 1) * (p - 1);
        m.tau_ *= e + 1;
    }
    return m;
}

inline residue gcd3(std::int64_t a, std::int64_t b, std::int64_t c) {
    return std::gcd(std::gcd(a < 0 ? -a : a, b < 0 ? -b : b), c < 0 ? -c : c);
}

inline residue power_mod(residue base, std::uint64_t exp, std::int64_t q) {
    return static_cast<residue>(detail::powmod(static_cast<std::uint64_t>(canonical(base, q)), exp,
                                               static_cast<std::uint64_t>(q)));
}

inline residue mul_mod(residue a, residue b, std::int64_t q) {
    return static_cast<residue>(detail::mulmod(static_cast<std::uint64_t>(canonical(a, q)),
                                               static_cast<std::uint64_t>(canonical(b, q)),
                                               static_cast<std::uint64_t>(q)));
}

/// Inverse of d modulo q by the extended Euclidean algorithm.
inline residue mod_inverse(residue d, const Modulus& m) {
    const std::int64_t q = m.value();
    std::int64_t a = canonical(d, q), b = q;
    std::int64_t x0 = 1, x1 = 0;
    while (b != 0) {
        std::int64_t t = a / b;
        std::tie(a, b) = std::make_pair(b, a - t * b);
        std::tie(x0, x1) = std::make_pair(x1, x0 - t * x1);
    }
    require(a == 1, errc::not_a_unit,
            std::to_string(d) + " is not invertible modulo " + std::to_string(q));
    return canonical(x0, q);
}

/// The unit group (Z/qZ)^x with a dense inverse table.
struct UnitGroupView {
    Modulus modulus;
    std::vector<residue> units;          // ascending
    std::vector<residue> inverse_table;  // indexed by residue, -1 off the group

    std::size_t size() const noexcept { return units.size(); }

    bool contains(residue d) const { return inverse_table[static_cast<std::size_t>(canonical(d, modulus.value()))] >= 0; }

    residue inverse_of(residue d) const {
        const residue r = inverse_table[static_cast<std::size_t>(canonical(d, modulus.value()))];
        require(r >= 0, errc::not_a_unit,
                std::to_string(d) + " is not a unit modulo " + std::to_string(modulus.value()));
        return r;
    }
};

inline constexpr std::int64_t unit_group_cap = 200'000'000;

inline UnitGroupView unit_group(const Modulus& m) {
    const std::int64_t q = m.value();
    require(q <= unit_group_cap, errc::resource_limit, "unit group enumeration capped at q <= 2e8");
    UnitGroupView g{m, {}, std::vector<residue>(static_cast<std::size_t>(q), -1)};
    g.units.reserve(static_cast<std::size_t>(m.phi()));
    if (q == 1) {
        // The zero ring: 0 is its own unit.
        g.units.push_back(0);
        g.inverse_table[0] = 0;
        return g;
    }
    for (residue d = 1; d < q; ++d) {
        if (std::gcd(d, q) != 1) continue;
        g.units.push_back(d);
        if (g.inverse_table[static_cast<std::size_t>(d)] < 0) {
            const residue inv = mod_inverse(d, m);
            g.inverse_table[static_cast<std::size_t>(d)] = inv;
            g.inverse_table[static_cast<std::size_t>(inv)] = d;
        }
    }
    return g;
}

/// True when (Z/qZ)^x is cyclic: q in {1, 2, 4}, p^k or 2p^k with p odd.
inline bool has_cyclic_unit_group(const Modulus& m) {
    const std::int64_t q = m.value();
    if (q == 1 || q == 2 || q == 4) return true;
    const auto& f = m.factors();
    if (f.size() == 1) return f[0].prime != 2;
    return f.size() == 2 && f[0].prime == 2 && f[0].exponent == 1;
}

/// Smallest generator of a cyclic unit group.
inline residue primitive_root(const Modulus& m) {
    require(has_cyclic_unit_group(m), errc::unsupported_modulus,
            "(Z/" + std::to_string(m.value()) + "Z)^x is not cyclic");
    const std::int64_t q = m.value();
    if (q == 1) return 0;
    if (q == 2) return 1;
    const std::int64_t phi = m.phi();
    const auto phi_factors = make_modulus(phi).factors();
    for (residue g = 2; g < q; ++g) {
        if (std::gcd(g, q) != 1) continue;
        bool generates = std::all_of(phi_factors.begin(), phi_factors.end(), [&](const prime_power& f) {
            return power_mod(g, static_cast<std::uint64_t>(phi / f.prime), q) != 1;
        });
        if (generates) return g;
    }
    fail(errc::unsupported_modulus, "no primitive root found");
}

/// A coset a*H of a subgroup H of (Z/qZ)^x.
struct SubgroupCoset {
    Modulus modulus;
    residue representative;
    std::vector<residue> elements;  // ascending
    std::int64_t subgroup_order;
};

/// The coset a*H where H is the unique subgroup of index k in a cyclic
/// unit group, H = { g^(k*j) }.
inline SubgroupCoset subgroup_by_index(const Modulus& m, std::int64_t k, residue a) {
    require(has_cyclic_unit_group(m), errc::unsupported_modulus,
            "subgroup_by_index needs a cyclic unit group; q = " + std::to_string(m.value()));
    const std::int64_t q = m.value();
    const std::int64_t phi = m.phi();
    require(k >= 1 && phi % k == 0, errc::invalid_index,
            "index " + std::to_string(k) + " does not divide phi(q) = " + std::to_string(phi));
    const residue rep = canonical(a, q);
    require(std::gcd(rep, q) == 1, errc::not_a_unit, "coset representative must be a unit");

    const std::int64_t order = phi / k;
    const residue g = primitive_root(m);
    const residue step = power_mod(g, static_cast<std::uint64_t>(k), q);
    SubgroupCoset c{m, rep, {}, order};
    c.elements.reserve(static_cast<std::size_t>(order));
    residue h = canonical(1, q);
    for (std::int64_t j = 0; j < order; ++j) {
        c.elements.push_back(mul_mod(rep, h, q));
        h = mul_mod(h, step, q);
    }
    std::sort(c.elements.begin(), c.elements.end());
    return c;
}

/// The coset a*H where H is generated by the given units. Works for any q,
/// which covers the non-cyclic groups where "the subgroup of index k" is
/// not unique.
inline SubgroupCoset subgroup_from_generators(const Modulus& m, std::span<const residue> generators, residue a) {
    const std::int64_t q = m.value();
    const residue rep = canonical(a, q);
    require(std::gcd(rep, q) == 1, errc::not_a_unit, "coset representative must be a unit");
    std::vector<char> seen(static_cast<std::size_t>(q), 0);
    std::vector<residue> h{canonical(1, q)};
    seen[static_cast<std::size_t>(h[0])] = 1;
    for (std::size_t i = 0; i < h.size(); ++i) {
        for (residue gen : generators) {
            require(std::gcd(canonical(gen, q), q) == 1, errc::not_a_unit, "subgroup generator must be a unit");
            const residue next = mul_mod(h[i], gen, q);
            if (!seen[static_cast<std::size_t>(next)]) {
                seen[static_cast<std::size_t>(next)] = 1;
                h.push_back(next);
            }
        }
    }
    SubgroupCoset c{m, rep, {}, static_cast<std::int64_t>(h.size())};
    for (residue x : h) c.elements.push_back(mul_mod(rep, x, q));
    std::sort(c.elements.begin(), c.elements.end());
    return c;
}

/// Checks the coset invariants: |elements| = order, order | phi(q) and
/// a^-1 * elements is a subgroup.
inline bool is_valid_coset(const SubgroupCoset& c) {
    const std::int64_t q = c.modulus.value();
    if (static_cast<std::int64_t>(c.elements.size()) != c.subgroup_order) return false;
    if (c.subgroup_order <= 0 || c.modulus.phi() % c.subgroup_order != 0) return false;
    const residue a_inv = mod_inverse(c.representative, c.modulus);
    std::vector<residue> h;
    for (residue x : c.elements) h.push_back(mul_mod(a_inv, x, q));
    std::sort(h.begin(), h.end());
    if (!std::binary_search(h.begin(), h.end(), canonical(1, q))) return false;
    for (residue x : h) {
        for (residue y : h) {
            if (!std::binary_search(h.begin(), h.end(), mul_mod(x, y, q))) return false;
        }
    }
    return true;
}

// -----------------------------------------------------------------------------
// Dirichlet characters
// -----------------------------------------------------------------------------

/// One cyclic factor of (Z/qZ)^x in the CRT decomposition.
struct CharacterComponent {
    std::int64_t modulus;   // p^e, or 2, or 4
    residue generator;
    std::int64_t order;     // phi(p^e)
};

class DirichletCharacter;

/// The cyclic components of (Z/qZ)^x together with discrete-log tables.
/// Moduli divisible by 8 are rejected: (Z/2^kZ)^x needs two generators there.
class CharacterGroup {
public:
    explicit CharacterGroup(const Modulus& m) : modulus_(m) {
        for (const auto& [p, e] : m.factors()) {
            const std::int64_t pe = detail::ipow(p, e);
            if (p == 2) {
                require(e <= 2, errc::unsupported_modulus,
                        "characters modulo q with 8 | q are not supported (q = " + std::to_string(m.value()) + ")");
                components_.push_back(e == 1 ? CharacterComponent{2, 1, 1} : CharacterComponent{4, 3, 2});
            } else {
                components_.push_back({pe, primitive_root(make_modulus(pe)), pe / p * (p - 1)});
            }
        }
        for (const auto& c : components_) {
            std::vector<std::int64_t> log(static_cast<std::size_t>(c.modulus), -1);
            residue x = 1 % c.modulus;
            for (std::int64_t t = 0; t < c.order; ++t) {
                log[static_cast<std::size_t>(x)] = t;
                x = mul_mod(x, c.generator, c.modulus);
            }
            dlog_.push_back(std::move(log));
        }
        order_lcm_ = 1;
        for (const auto& c : components_) order_lcm_ = std::lcm(order_lcm_, c.order);
    }

    const Modulus& modulus() const noexcept { return modulus_; }
    const std::vector<CharacterComponent>& components() const noexcept { return components_; }
    std::int64_t size() const noexcept { return modulus_.phi(); }

    DirichletCharacter character(std::span<const std::int64_t> indices) const;

    /// All phi(q) characters, in lexicographic order of their index tuples.
    std::vector<DirichletCharacter> all() const;

private:
    Modulus modulus_;
    std::vector<CharacterComponent> components_;
    std::vector<std::vector<std::int64_t>> dlog_;
    std::int64_t order_lcm_ = 1;
};

class DirichletCharacter {
public:
    const Modulus& modulus() const noexcept { return modulus_; }
    const std::vector<CharacterComponent>& components() const noexcept { return components_; }
    const std::vector<std::int64_t>& indices() const noexcept { return indices_; }

    std::complex<double> operator()(residue d) const {
        return values_[static_cast<std::size_t>(canonical(d, modulus_.value()))];
    }

    std::span<const std::complex<double>> values() const noexcept { return values_; }

    bool is_principal() const noexcept {
        return std::all_of(indices_.begin(), indices_.end(), [](std::int64_t j) { return j == 0; });
    }

    /// Order of the character as an element of the dual group.
    std::int64_t order() const {
        std::int64_t o = 1;
        for (std::size_t i = 0; i < indices_.size(); ++i) {
            const std::int64_t ord = components_[i].order;
            o = std::lcm(o, ord / std::gcd(indices_[i], ord));
        }
        return o;
    }

private:
    friend class CharacterGroup;
    DirichletCharacter(Modulus m) : modulus_(std::move(m)) {}

    Modulus modulus_;
    std::vector<CharacterComponent> components_;
    std::vector<std::int64_t> indices_;
    std::vector<std::complex<double>> values_;
};

inline DirichletCharacter CharacterGroup::character(std::span<const std::int64_t> indices) const {
    require(indices.size() == components_.size(), errc::invalid_argument,
            "character needs one index per component (" + std::to_string(components_.size()) + ")");
    DirichletCharacter chi(modulus_);
    chi.components_ = components_;
    for (std::size_t i = 0; i < indices.size(); ++i) chi.indices_.push_back(canonical(indices[i], components_[i].order));

    const std::int64_t q = modulus_.value();
    const std::int64_t L = order_lcm_;
    chi.values_.assign(static_cast<std::size_t>(q), {0.0, 0.0});
    for (residue d = 0; d < q; ++d) {
        if (std::gcd(d, q) != 1 && q != 1) continue;
        // chi(d) = e( sum_i j_i t_i / ord_i ), accumulated exactly over lcm(ord_i).
        std::int64_t num = 0;
        for (std::size_t i = 0; i < components_.size(); ++i) {
            const auto& c = components_[i];
            const std::int64_t t = dlog_[i][static_cast<std::size_t>(d % c.modulus)];
            num = (num + (chi.indices_[i] * t % c.order) * (L / c.order)) % L;
        }
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(num) / static_cast<double>(L);
        chi.values_[static_cast<std::size_t>(d)] =
            num == 0 ? std::complex<double>(1.0, 0.0) : std::complex<double>(std::cos(angle), std::sin(angle));
    }
    return chi;
}

inline std::vector<DirichletCharacter> CharacterGroup::all() const {
    std::vector<DirichletCharacter> out;
    out.reserve(static_cast<std::size_t>(modulus_.phi()));
    std::vector<std::int64_t> idx(components_.size(), 0);
    while (true) {
        out.push_back(character(idx));
        std::size_t i = idx.size();
        while (i > 0) {
            --i;
            if (++idx[i] < components_[i].order) break;
            idx[i] = 0;
            if (i == 0) return out;
        }
        if (idx.empty()) return out;
    }
}

inline DirichletCharacter character(const Modulus& m, std::span<const std::int64_t> indices) {
    return CharacterGroup(m).character(indices);
}

/// True when chi is identically 1 on the subgroup underlying the coset.
inline bool is_trivial_on(const DirichletCharacter& chi, const SubgroupCoset& coset) {
    const std::int64_t q = coset.modulus.value();
    const residue a_inv = mod_inverse(coset.representative, coset.modulus);
    return std::all_of(coset.elements.begin(), coset.elements.end(), [&](residue x) {
        return std::abs(chi(mul_mod(a_inv, x, q)) - std::complex<double>(1.0, 0.0)) < 1e-9;
    });
}

} // namespace modtorus
