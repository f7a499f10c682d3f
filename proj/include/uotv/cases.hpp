#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "uotv/field.hpp"

namespace uotv {

class unknown_case_error : public std::invalid_argument {
public:
    explicit unknown_case_error(const std::string& id) : std::invalid_argument("unknown case '" + id + "'") {}
};

struct CaseSpec {
    std::string id;
    std::optional<std::uint64_t> seed;
};

struct PerturbSpec {
    long dx = 0;  ///< cells east
    long dy = 0;  ///< cells north
    double mult = 1.0;
    double add = 0.0;
};

/// SplitMix64 (Steele, Lea and Flood 2014). Small, splittable and trivially
/// portable, so stochastic cases can be regenerated in any language.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

/// FNV-1a of the case id, mixed into the seed so that different cases drawn
/// with the same seed are different realisations.
inline std::uint64_t case_stream_seed(std::string_view id, std::uint64_t seed) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : id) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return seed ^ h;
}

namespace shapes {

using Mask = std::vector<unsigned char>;

inline constexpr std::size_t domain = 200;

inline Grid2D case_grid() { return unit_grid(domain, domain); }

template <class Pred>
Mask rasterize(Pred&& inside) {
    const Grid2D g = case_grid();
    Mask m(g.size(), 0);
    for (std::size_t j = 0; j < g.ny; ++j)
        for (std::size_t i = 0; i < g.nx; ++i) m[g.index(i, j)] = inside(g.x(i), g.y(j)) ? 1 : 0;
    return m;
}

/// Cells whose unit square touches the closed disk. This is the convention
/// that gives 1345 cells for radius 20.
inline Mask disk(double cx, double cy, double r) {
    return rasterize([=](double x, double y) {
        const double ex = std::max(std::abs(x - cx) - 0.5, 0.0);
        const double ey = std::max(std::abs(y - cy) - 0.5, 0.0);
        return ex * ex + ey * ey <= r * r;
    });
}

/// Ellipse with semi-axes (major, minor), major axis rotated counterclockwise
/// from vertical by angle_deg; tested on cell centers.
inline Mask ellipse(double cx, double cy, double major, double minor, double angle_deg) {
    const double t = angle_deg * std::numbers::pi / 180.0;
    const double ux = -std::sin(t), uy = std::cos(t);
    return rasterize([=](double x, double y) {
        const double px = x - cx, py = y - cy;
        const double a = (px * ux + py * uy) / major;
        const double b = (px * uy - py * ux) / minor;
        return a * a + b * b <= 1.0 + 1e-9;
    });
}

inline Mask large_ellipse(double cx, double cy, double angle) { return ellipse(cx, cy, 50.0, 10.0, angle); }
inline Mask small_ellipse(double cx, double cy, double angle) { return ellipse(cx, cy, 12.5, 2.5, angle); }

inline Mask point(std::size_t x, std::size_t y) {
    const Grid2D g = case_grid();
    Mask m(g.size(), 0);
    m[g.index(x - 1, y - 1)] = 1;
    return m;
}

inline Mask empty() { return Mask(case_grid().size(), 0); }
inline Mask full() { return Mask(case_grid().size(), 1); }

inline Mask unite(std::initializer_list<Mask> parts) {
    Mask out = empty();
    for (const auto& p : parts)
        for (std::size_t k = 0; k < out.size(); ++k) out[k] |= p[k];
    return out;
}

inline Mask complement(Mask m) {
    for (auto& v : m) v = !v;
    return m;
}

/// Cells within distance r (center to center) of any set cell: a disk
/// kernel smoothing of the mask, thresholded at any positive value.
inline Mask dilate(const Mask& m, double r) {
    const Grid2D g = case_grid();
    const long R = static_cast<long>(std::floor(r));
    Mask out = empty();
    for (long j = 0; j < static_cast<long>(g.ny); ++j)
        for (long i = 0; i < static_cast<long>(g.nx); ++i) {
            if (!m[g.index(i, j)]) continue;
            for (long v = -R; v <= R; ++v)
                for (long u = -R; u <= R; ++u) {
                    if (static_cast<double>(u * u + v * v) > r * r) continue;
                    const long x = i + u, y = j + v;
                    if (x < 0 || y < 0 || x >= static_cast<long>(g.nx) || y >= static_cast<long>(g.ny)) continue;
                    out[g.index(x, y)] = 1;
                }
        }
    return out;
}

/// Bernoulli(p) draws in grid order over the cells of `where`.
inline Mask scatter(const Mask& where, double p, SplitMix64& rng) {
    Mask out = empty();
    for (std::size_t k = 0; k < where.size(); ++k)
        if (where[k] && rng.uniform() < p) out[k] = 1;
    return out;
}

inline DensityField to_field(const Mask& m) {
    std::vector<double> w(m.begin(), m.end());
    return DensityField(case_grid(), std::move(w));
}

}  // namespace shapes

inline bool is_stochastic_case(std::string_view id) {
    return id == "S1" || id == "S2" || id == "S3" || id == "N1" || id == "N2";
}

/// Ids that generate_case knows how to build.
inline std::vector<std::string> known_cases() {
    return {"C1",  "C2",  "C3",  "C4",  "C5",  "C6",  "C7",  "C8",  "C9",  "C11", "C12", "C13", "C14",
            "E1",  "E2",  "E3",  "E4",  "E6",  "E7",  "E9",  "E10", "E11", "E12", "E14", "E19", "E20",
            "P1",  "P2",  "P3",  "P4",  "P5",  "P6",  "P7",  "S1",  "S2",  "S3",  "N1",  "N2",  "N3",
            "N4",  "H1",  "H2"};
}

namespace detail {

inline shapes::Mask case_mask(const std::string& id, std::uint64_t seed) {
    using namespace shapes;
    const double r8 = 8.0, r8s = 8.0 / std::numbers::sqrt2;
    auto e19 = [] {
        return unite({ellipse(100, 40, 20.0, 2.5, 0), ellipse(100, 55, 17.5, 2.5, 0), ellipse(125, 75, 12.5, 2.5, 0)});
    };
    static const std::map<std::string, std::function<Mask()>> deterministic = {
        {"C1", [] { return disk(100, 100, 20); }},
        {"C2", [] { return disk(140, 100, 20); }},
        {"C3", [] { return disk(180, 100, 20); }},
        {"C4", [] { return disk(140, 140, 20); }},
        {"C5", [] { return disk(160, 100, 20); }},
        {"C6", [] { return unite({disk(100, 140, 20), disk(100, 60, 20)}); }},
        {"C7", [] { return unite({disk(100, 140, 20), disk(140, 60, 20)}); }},
        {"C8", [] { return unite({disk(100, 140, 20), disk(180, 60, 20)}); }},
        {"C9", [] { return disk(100, 100, 60); }},
        {"C11", [] { return unite({disk(100, 100, 20), disk(180, 100, 20), disk(140, 140, 20)}); }},
        {"C12", [] { return unite({disk(120, 160, 20), disk(80, 40, 20)}); }},
        {"C13", [=] { return unite({disk(75, 25, r8), disk(88, 180, r8s)}); }},
        {"C14", [=] { return unite({disk(125, 25, r8), disk(113, 180, r8s)}); }},
        {"E1", [] { return large_ellipse(100, 100, 0); }},
        {"E2", [] { return large_ellipse(100, 100, 45); }},
        {"E3", [] { return large_ellipse(100, 100, 90); }},
        {"E4", [] { return large_ellipse(100, 100, 135); }},
        {"E6", [] { return small_ellipse(100, 100, 45); }},
        {"E7", [] { return small_ellipse(100, 100, 90); }},
        {"E9", [] { return large_ellipse(125, 100, 0); }},
        {"E10", [] { return large_ellipse(115, 80, 45); }},
        {"E11", [] { return large_ellipse(100, 75, 90); }},
        {"E12", [] { return large_ellipse(115, 120, 135); }},
        {"E14", [] { return small_ellipse(110, 92, 45); }},
        {"E19", e19},
        {"E20", [=] { return dilate(e19(), 12.0); }},
        {"P1", [] { return empty(); }},
        {"P2", [] { return full(); }},
        {"P3", [] { return point(1, 1); }},
        {"P4", [] { return point(200, 200); }},
        {"P5", [] { return point(100, 100); }},
        {"P6", [] { return unite({point(1, 1), point(200, 1), point(1, 200), point(200, 200)}); }},
        {"P7", [] { return unite({point(1, 100), point(100, 1), point(200, 100), point(100, 200)}); }},
        {"N3", [] { return unite({disk(140, 140, 20), point(100, 100)}); }},
        {"N4", [] { return unite({disk(140, 140, 20), point(1, 1)}); }},
        {"H1", [] { return complement(disk(100, 100, 20)); }},
        {"H2", [] { return complement(disk(140, 100, 20)); }},
    };
    if (auto it = deterministic.find(id); it != deterministic.end()) return it->second();

    SplitMix64 rng(case_stream_seed(id, seed));
    if (id == "S1" || id == "S2") return scatter(disk(50, 100, 35), 0.05, rng);
    if (id == "S3") return scatter(disk(150, 100, 35), 0.05, rng);
    if (id == "N1") return unite({disk(100, 100, 20), scatter(full(), 0.001, rng)});
    if (id == "N2") return unite({disk(140, 140, 20), scatter(full(), 0.001, rng)});
    throw unknown_case_error(id);
}

}  // namespace detail

/// Binary idealised case on the 200x200 grid indexed (1,1)..(200,200).
inline DensityField generate_case(const CaseSpec& spec) {
    const bool stochastic = is_stochastic_case(spec.id);
    if (stochastic && !spec.seed) throw std::invalid_argument("case " + spec.id + " is stochastic and needs a seed");
    return shapes::to_field(detail::case_mask(spec.id, spec.seed.value_or(0)));
}

inline DensityField generate_case(const std::string& id) { return generate_case(CaseSpec{id, std::nullopt}); }

/// Integer shift within the grid (cells leaving are dropped, vacated cells are
/// zero), then w <- max(0, mult w + add) on positive cells.
inline DensityField perturb_field(const DensityField& field, const PerturbSpec& p) {
    if (!(p.mult >= 0.0)) throw std::invalid_argument("perturb: mult must be nonnegative");
    const Grid2D& g = field.grid();
    std::vector<double> w(g.size(), 0.0);
    const long nx = static_cast<long>(g.nx), ny = static_cast<long>(g.ny);
    for (long j = 0; j < ny; ++j)
        for (long i = 0; i < nx; ++i) {
            const long ti = i + p.dx, tj = j + p.dy;
            if (ti < 0 || tj < 0 || ti >= nx || tj >= ny) continue;
            const double v = field(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            w[g.index(static_cast<std::size_t>(ti), static_cast<std::size_t>(tj))] = v > 0.0 ? std::max(0.0, p.mult * v + p.add) : 0.0;
        }
    return DensityField(g, std::move(w));
}

}  // namespace uotv
