#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "uotv/field.hpp"

namespace uotv {

/// Nondimensional measure on a rectangular window of a grid. The window is
/// usually the bounding box of the positive-mass cells; everything outside it
/// has zero mass and cannot influence the solve.
struct GridSupport {
    Grid2D grid;                    ///< the full original grid
    std::size_t ix0 = 0, iy0 = 0;   ///< window offset inside grid
    std::size_t nx = 0, ny = 0;     ///< window shape
    std::vector<double> xs, ys;     ///< scaled axis coordinates of the window
    std::vector<double> raw_xs, raw_ys;
    std::vector<double> weights;    ///< scaled masses, x fastest
    std::vector<double> log_weights;
    double mass = 0.0;
    double L = 1.0;

    [[nodiscard]] std::size_t size() const noexcept { return weights.size(); }
    [[nodiscard]] double x(std::size_t k) const noexcept { return xs[k % nx]; }
    [[nodiscard]] double y(std::size_t k) const noexcept { return ys[k / nx]; }
    [[nodiscard]] double raw_x(std::size_t k) const noexcept { return raw_xs[k % nx]; }
    [[nodiscard]] double raw_y(std::size_t k) const noexcept { return raw_ys[k / nx]; }
    /// Index of window point k in the full grid.
    [[nodiscard]] std::size_t grid_index(std::size_t k) const noexcept {
        return grid.index(ix0 + k % nx, iy0 + k / nx);
    }
};

/// Irregular weighted point cloud, already in scaled coordinates.
struct PointSupport {
    std::vector<double> xs, ys;
    std::vector<double> weights;
    std::vector<double> log_weights;
    double mass = 0.0;
    double L = 1.0;

    [[nodiscard]] std::size_t size() const noexcept { return weights.size(); }
    [[nodiscard]] double x(std::size_t k) const noexcept { return xs[k]; }
    [[nodiscard]] double y(std::size_t k) const noexcept { return ys[k]; }
    [[nodiscard]] double raw_x(std::size_t k) const noexcept { return xs[k] * L; }
    [[nodiscard]] double raw_y(std::size_t k) const noexcept { return ys[k] * L; }
};

namespace detail {

inline void fill_log_weights(const std::vector<double>& w, std::vector<double>& lw, double& mass) {
    lw.resize(w.size());
    mass = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        lw[k] = w[k] > 0.0 ? std::log(w[k]) : -std::numeric_limits<double>::infinity();
        mass += w[k];
    }
}

}  // namespace detail

/// Scales a field. With crop set the window shrinks to the bounding box of
/// positive weights; a null field yields an empty window.
inline GridSupport make_grid_support(const DensityField& field, const ScalingContext& scaling, bool crop = true) {
    scaling.validate();
    const Grid2D& g = field.grid();
    std::size_t i_lo = 0, i_hi = g.nx, j_lo = 0, j_hi = g.ny;
    if (crop) {
        i_lo = g.nx, i_hi = 0, j_lo = g.ny, j_hi = 0;
        for (std::size_t j = 0; j < g.ny; ++j)
            for (std::size_t i = 0; i < g.nx; ++i)
                if (field(i, j) > 0.0) {
                    i_lo = std::min(i_lo, i), i_hi = std::max(i_hi, i + 1);
                    j_lo = std::min(j_lo, j), j_hi = std::max(j_hi, j + 1);
                }
        if (i_lo >= i_hi) i_lo = i_hi = j_lo = j_hi = 0;
    }
    GridSupport s;
    s.grid = g;
    s.ix0 = i_lo, s.iy0 = j_lo;
    s.nx = i_hi - i_lo, s.ny = j_hi - j_lo;
    s.L = scaling.L;
    for (std::size_t i = i_lo; i < i_hi; ++i) {
        s.raw_xs.push_back(g.x(i));
        s.xs.push_back(g.x(i) / scaling.L);
    }
    for (std::size_t j = j_lo; j < j_hi; ++j) {
        s.raw_ys.push_back(g.y(j));
        s.ys.push_back(g.y(j) / scaling.L);
    }
    s.weights.reserve(s.nx * s.ny);
    for (std::size_t j = j_lo; j < j_hi; ++j)
        for (std::size_t i = i_lo; i < i_hi; ++i) s.weights.push_back(field(i, j) / scaling.M);
    detail::fill_log_weights(s.weights, s.log_weights, s.mass);
    return s;
}

/// Points given in scaled units.
inline PointSupport make_point_support(std::vector<double> xs, std::vector<double> ys, std::vector<double> weights,
                                       double L = 1.0) {
    if (xs.size() != weights.size() || ys.size() != weights.size())
        throw std::invalid_argument("point support: coordinate and weight counts differ");
    for (double w : weights)
        if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("point support: weights must be finite and nonnegative");
    PointSupport s;
    s.xs = std::move(xs), s.ys = std::move(ys), s.weights = std::move(weights), s.L = L;
    detail::fill_log_weights(s.weights, s.log_weights, s.mass);
    return s;
}

/// Positive-mass cells of a field as a scaled point cloud, in grid order.
inline PointSupport make_point_support(const DensityField& field, const ScalingContext& scaling) {
    scaling.validate();
    const Grid2D& g = field.grid();
    std::vector<double> xs, ys, ws;
    for (std::size_t j = 0; j < g.ny; ++j)
        for (std::size_t i = 0; i < g.nx; ++i)
            if (field(i, j) > 0.0) {
                xs.push_back(g.x(i) / scaling.L);
                ys.push_back(g.y(j) / scaling.L);
                ws.push_back(field(i, j) / scaling.M);
            }
    return make_point_support(std::move(xs), std::move(ys), std::move(ws), scaling.L);
}

template <class S>
bool same_measure(const S& a, const S& b) {
    return a.xs == b.xs && a.ys == b.ys && a.weights == b.weights;
}

/// Strict weak order on measures, used to fix which potential a cross solve
/// updates first so that swapping the inputs replays the same arithmetic.
template <class S>
bool canonical_less(const S& a, const S& b) {
    if (a.mass != b.mass) return a.mass < b.mass;
    if (a.size() != b.size()) return a.size() < b.size();
    if (a.xs != b.xs) return a.xs < b.xs;
    if (a.ys != b.ys) return a.ys < b.ys;
    return a.weights < b.weights;
}

}  // namespace uotv
