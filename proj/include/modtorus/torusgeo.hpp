#pragma once

/**
 * @file torusgeo.hpp
 * @brief Point sets on the flat torus [0,1)^2 with a uniform-grid index.
 */

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "modtorus/arith.hpp"
#include "modtorus/error.hpp"
#include "modtorus/parallel.hpp"

namespace modtorus {

struct TorusPoint {
    double x1 = 0.0;
    double x2 = 0.0;

    bool operator==(const TorusPoint&) const = default;
};

inline double wrap_unit(double x) {
    double r = x - std::floor(x);
    return r >= 1.0 ? 0.0 : r;
}

inline double torus_delta(double a, double b) {
    const double d = std::abs(a - b);
    return std::min(d, 1.0 - d);
}

inline double toroidal_distance_sq(TorusPoint p, TorusPoint y) {
    const double d1 = torus_delta(p.x1, y.x1);
    const double d2 = torus_delta(p.x2, y.x2);
    return d1 * d1 + d2 * d2;
}

inline double toroidal_distance(TorusPoint p, TorusPoint y) { return std::sqrt(toroidal_distance_sq(p, y)); }

/// Largest possible distance on the torus.
inline constexpr double torus_diameter = std::numbers::sqrt2 / 2.0;

struct BallSpec {
    TorusPoint center;
    double R = 0.0;

    void validate() const {
        require(std::isfinite(R) && R > 0.0 && R < 0.5, errc::invalid_argument,
                "ball radius must lie in (0, 1/2), got " + std::to_string(R));
    }
};

/// Points on the torus bucketed into a G x G grid (compressed rows).
class PointSet {
public:
    PointSet(std::vector<TorusPoint> points, std::string label, int grid = 0)
        : points_(std::move(points)), label_(std::move(label)) {
        for (auto& p : points_) {
            require(std::isfinite(p.x1) && std::isfinite(p.x2), errc::invalid_argument, "non-finite coordinate");
            p = {wrap_unit(p.x1), wrap_unit(p.x2)};
        }
        if (grid <= 0) {
            grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(points_.size()))));
        }
        G_ = std::clamp(grid, 1, 4096);
        build_index();
    }

    const std::vector<TorusPoint>& points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    bool empty() const noexcept { return points_.empty(); }
    const std::string& label() const noexcept { return label_; }
    int grid() const noexcept { return G_; }

    int cell_of(double x) const noexcept { return std::min(static_cast<int>(x * G_), G_ - 1); }

    std::span<const std::uint32_t> bucket(int i, int j) const {
        const std::size_t c = static_cast<std::size_t>(i) * static_cast<std::size_t>(G_) + static_cast<std::size_t>(j);
        return {cell_points_.data() + cell_start_[c], cell_points_.data() + cell_start_[c + 1]};
    }

    /// Calls f(index) for every point in the cells that meet the square of
    /// half-width R around y. Each point is visited at most once.
    template <class F>
    void for_each_candidate(TorusPoint y, double R, F&& f) const {
        const auto span = [&](double c, int& first, int& count) {
            const int lo = static_cast<int>(std::floor((c - R) * G_));
            const int hi = static_cast<int>(std::floor((c + R) * G_));
            count = std::min(hi - lo + 1, G_);
            first = ((lo % G_) + G_) % G_;
        };
        int i0, ni, j0, nj;
        span(y.x1, i0, ni);
        span(y.x2, j0, nj);
        for (int a = 0; a < ni; ++a) {
            const int i = (i0 + a) % G_;
            for (int b = 0; b < nj; ++b) {
                for (std::uint32_t idx : bucket(i, (j0 + b) % G_)) f(idx);
            }
        }
    }

private:
    void build_index() {
        const std::size_t cells = static_cast<std::size_t>(G_) * static_cast<std::size_t>(G_);
        cell_start_.assign(cells + 1, 0);
        std::vector<std::size_t> cell(points_.size());
        for (std::size_t k = 0; k < points_.size(); ++k) {
            cell[k] = static_cast<std::size_t>(cell_of(points_[k].x1)) * static_cast<std::size_t>(G_) +
                      static_cast<std::size_t>(cell_of(points_[k].x2));
            ++cell_start_[cell[k] + 1];
        }
        for (std::size_t c = 0; c < cells; ++c) cell_start_[c + 1] += cell_start_[c];
        cell_points_.resize(points_.size());
        std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
        for (std::size_t k = 0; k < points_.size(); ++k) cell_points_[fill[cell[k]]++] = static_cast<std::uint32_t>(k);
    }

    std::vector<TorusPoint> points_;
    std::string label_;
    int G_ = 1;
    std::vector<std::size_t> cell_start_;
    std::vector<std::uint32_t> cell_points_;
};

/// S_q = {(d/q, dbar/q) : d a unit mod q}, in increasing order of d.
inline PointSet generate_s_q(const Modulus& mod, int grid = 0) {
    const auto units = unit_group(mod);
    const double q = static_cast<double>(mod.value());
    std::vector<TorusPoint> pts;
    pts.reserve(units.size());
    for (residue d : units.units) {
        if (mod.value() == 1) {
            pts.push_back({0.0, 0.0});
            continue;
        }
        pts.push_back({static_cast<double>(d) / q,
                       static_cast<double>(units.inverse_table[static_cast<std::size_t>(d)]) / q});
    }
    return PointSet(std::move(pts), "s_q(" + std::to_string(mod.value()) + ")", grid);
}

/// Number of points with toroidal distance <= R from the center.
inline std::size_t ball_count(const PointSet& ps, const BallSpec& ball) {
    ball.validate();
    const double R2 = ball.R * ball.R;
    std::size_t count = 0;
    ps.for_each_candidate(ball.center, ball.R, [&](std::uint32_t k) {
        if (toroidal_distance_sq(ps.points()[k], ball.center) <= R2) ++count;
    });
    return count;
}

/// Linear-scan reference for ball_count.
inline std::size_t ball_count_scan(const PointSet& ps, const BallSpec& ball) {
    const double R2 = ball.R * ball.R;
    return static_cast<std::size_t>(std::count_if(ps.points().begin(), ps.points().end(), [&](const TorusPoint& p) {
        return toroidal_distance_sq(p, ball.center) <= R2;
    }));
}

/// Squared distance from y to the nearest point, searching rings of cells
/// outward from the cell containing y.
inline double nearest_distance_sq(const PointSet& ps, TorusPoint y) {
    require(!ps.empty(), errc::invalid_argument, "nearest_distance needs a nonempty point set");
    const int G = ps.grid();
    const double h = 1.0 / G;
    const int ci = ps.cell_of(wrap_unit(y.x1)), cj = ps.cell_of(wrap_unit(y.x2));
    double best = std::numeric_limits<double>::infinity();
    auto visit = [&](int i, int j) {
        for (std::uint32_t k : ps.bucket(((i % G) + G) % G, ((j % G) + G) % G)) {
            best = std::min(best, toroidal_distance_sq(ps.points()[k], y));
        }
    };
    for (int r = 0;; ++r) {
        if (2 * r + 1 >= G) {
            for (const auto& p : ps.points()) best = std::min(best, toroidal_distance_sq(p, y));
            return best;
        }
        if (r == 0) {
            visit(ci, cj);
        } else {
            for (int d = -r; d <= r; ++d) {
                visit(ci - r, cj + d);
                visit(ci + r, cj + d);
            }
            for (int d = -r + 1; d <= r - 1; ++d) {
                visit(ci + d, cj - r);
                visit(ci + d, cj + r);
            }
        }
        // Cells beyond ring r are at least r h away along some axis.
        const double reach = r * h;
        if (best <= reach * reach) return best;
    }
}

inline double nearest_distance(const PointSet& ps, TorusPoint y) { return std::sqrt(nearest_distance_sq(ps, y)); }

/// Area of the intersection of two radius-R discs whose centers are t apart.
inline double lens_area(double t, double R) {
    require(std::isfinite(R) && R > 0.0, errc::invalid_argument, "lens radius must be positive");
    require(R < 0.25, errc::unsupported_radius, "lens_area needs R < 1/4 so only one periodic image can overlap");
    require(t >= 0.0, errc::invalid_argument, "center distance must be nonnegative");
    if (t >= 2.0 * R) return 0.0;
    const double u = t / (2.0 * R);
    return 2.0 * R * R * std::acos(u) - 0.5 * t * std::sqrt(4.0 * R * R - t * t);
}

// -----------------------------------------------------------------------------
// Coverage
// -----------------------------------------------------------------------------

/// Nearest-point distances at the centers of a G x G grid of cells.
///
/// For any y in a cell with center c, |dist(y, P) - dist(c, P)| <= h where
/// h = sqrt(2) / (2G) is the half-diagonal, which turns each sample into a
/// certified two-sided statement about the whole cell.
class CoverageProfile {
public:
    CoverageProfile(const PointSet& ps, int G) : G_(G) {
        require(G >= 8, errc::invalid_argument, "coverage grid needs G >= 8");
        require(!ps.empty(), errc::invalid_argument, "coverage of an empty point set");
        const std::size_t cells = static_cast<std::size_t>(G) * static_cast<std::size_t>(G);
        distance_.resize(cells);
        parallel_chunks(static_cast<std::size_t>(G), 8, [&](std::size_t b, std::size_t e, std::size_t) {
            for (std::size_t i = b; i < e; ++i) {
                for (int j = 0; j < G; ++j) {
                    const TorusPoint c{(static_cast<double>(i) + 0.5) / G, (j + 0.5) / G};
                    distance_[i * static_cast<std::size_t>(G) + static_cast<std::size_t>(j)] = nearest_distance(ps, c);
                }
            }
        });
        sorted_ = distance_;
        std::sort(sorted_.begin(), sorted_.end());
    }

    int grid() const noexcept { return G_; }
    double half_diagonal() const noexcept { return std::numbers::sqrt2 / (2.0 * G_); }
    double cell_area() const noexcept { return 1.0 / (static_cast<double>(G_) * G_); }
    const std::vector<double>& cell_distances() const noexcept { return distance_; }

    /// Two-sided bounds on the measure of { y : dist(y, P) > R }.
    std::pair<double, double> uncovered(double R) const {
        if (R >= torus_diameter) return {0.0, 0.0};
        const double h = half_diagonal();
        // Surely uncovered: d - h > R.  Possibly uncovered: d + h > R.
        const auto sure = sorted_.end() - std::upper_bound(sorted_.begin(), sorted_.end(), R + h);
        const auto maybe = sorted_.end() - std::upper_bound(sorted_.begin(), sorted_.end(), R - h);
        return {static_cast<double>(sure) * cell_area(), static_cast<double>(maybe) * cell_area()};
    }

    std::pair<double, double> covering_radius() const {
        const double lo = sorted_.back();
        return {lo, std::min(lo + half_diagonal(), torus_diameter)};
    }

private:
    int G_;
    std::vector<double> distance_;
    std::vector<double> sorted_;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const noexcept { return hi - lo; }
    bool contains(double x) const noexcept { return lo <= x && x <= hi; }
    bool intersects(const Interval& o) const noexcept { return lo <= o.hi && o.lo <= hi; }
};

inline Interval uncovered_measure(const PointSet& ps, double R, int G) {
    if (R >= torus_diameter) return {0.0, 0.0};
    const auto [lo, hi] = CoverageProfile(ps, G).uncovered(R);
    return {lo, hi};
}

inline Interval covering_radius(const PointSet& ps, int G) {
    const auto [lo, hi] = CoverageProfile(ps, G).covering_radius();
    return {lo, hi};
}

// -----------------------------------------------------------------------------
// Random baselines and CSV
// -----------------------------------------------------------------------------

/// xoshiro256** seeded through splitmix64; doubles take the top 53 bits.
class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& s : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            s = z ^ (z >> 31);
        }
    }

    std::uint64_t next() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }
    std::uint64_t state_[4]{};
};

inline PointSet random_pointset(std::size_t n, std::uint64_t seed, int grid = 0) {
    require(n >= 1, errc::invalid_argument, "random point set needs n >= 1");
    Xoshiro256 rng(seed);
    std::vector<TorusPoint> pts(n);
    for (auto& p : pts) {
        p.x1 = rng.uniform();
        p.x2 = rng.uniform();
    }
    return PointSet(std::move(pts), "random(" + std::to_string(n) + "," + std::to_string(seed) + ")", grid);
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_csv(std::ostream& out, const PointSet& ps) {
    out << "x1,x2\n";
    for (const auto& p : ps.points()) out << format_double(p.x1) << ',' << format_double(p.x2) << '\n';
}

inline PointSet read_csv(std::istream& in, std::string label = "csv") {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)) && line.rfind("x1,x2", 0) == 0, errc::invalid_argument,
            "point CSV must start with the header x1,x2");
    std::vector<TorusPoint> pts;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        require(comma != std::string::npos, errc::invalid_argument, "malformed CSV row: " + line);
        TorusPoint p;
        const char* end = line.data() + line.size();
        auto r1 = std::from_chars(line.data(), line.data() + comma, p.x1);
        auto r2 = std::from_chars(line.data() + comma + 1, end, p.x2);
        require(r1.ec == std::errc() && r2.ec == std::errc() && r2.ptr == end, errc::invalid_argument,
                "malformed CSV row: " + line);
        pts.push_back(p);
    }
    return PointSet(std::move(pts), std::move(label));
}

} // namespace modtorus
