#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "uotv/sinkhorn.hpp"

namespace uotv {

enum class Direction { forward, inverse };
enum class Averaging { mean, median };

/// Transport vectors from the positive-mass points of the source field, in
/// grid units. Forward vectors start on obs, inverse vectors on fcst.
struct VectorField {
    std::vector<double> origin_x, origin_y;
    std::vector<double> dx, dy;
    std::vector<double> weights;       ///< source intensity at each origin
    std::vector<std::size_t> index;    ///< point index in the source support
    Direction direction = Direction::forward;
    bool debiased = false;

    [[nodiscard]] std::size_t size() const noexcept { return dx.size(); }
    [[nodiscard]] bool empty() const noexcept { return dx.empty(); }
};

namespace detail {

/// Barycentric displacement (scaled units) and plan marginal for every source
/// point; valid is false where the marginal vanishes.
struct Projection {
    std::vector<double> dx, dy, pi;
    std::vector<unsigned char> valid;
};

template <class S>
Projection project(const SinkhornSolution<S>& sol, Direction dir) {
    if (sol.null_case) throw std::invalid_argument("transport vectors are undefined for a null field");
    const bool fwd = dir == Direction::forward;
    const S& src = fwd ? *sol.obs : *sol.fcst;
    const S& dst = fwd ? *sol.fcst : *sol.obs;
    const auto& src_pot = fwd ? sol.f : sol.g;
    const auto& dst_pot = fwd ? sol.g : sol.f;
    const double eps = sol.params.epsilon;
    const auto op = make_operator(src, dst, eps);
    const auto r = log_row_sums(op, dst, dst_pot, eps, AxisWeight::one, AxisWeight::one);
    const auto xp = log_row_sums(op, dst, dst_pot, eps, AxisWeight::pos, AxisWeight::one);
    const auto xn = log_row_sums(op, dst, dst_pot, eps, AxisWeight::neg, AxisWeight::one);
    const auto yp = log_row_sums(op, dst, dst_pot, eps, AxisWeight::one, AxisWeight::pos);
    const auto yn = log_row_sums(op, dst, dst_pot, eps, AxisWeight::one, AxisWeight::neg);
    Projection p;
    const std::size_t n = src.size();
    p.dx.assign(n, 0.0), p.dy.assign(n, 0.0), p.pi.assign(n, 0.0), p.valid.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(src.weights[i] > 0.0) || r[i] == neg_inf) continue;
        p.pi[i] = std::exp(src.log_weights[i] + src_pot[i] / eps + r[i]);
        if (!(p.pi[i] > 0.0)) continue;
        p.dx[i] = std::exp(xp[i] - r[i]) - std::exp(xn[i] - r[i]);
        p.dy[i] = std::exp(yp[i] - r[i]) - std::exp(yn[i] - r[i]);
        p.valid[i] = std::isfinite(p.dx[i]) && std::isfinite(p.dy[i]);
    }
    return p;
}

template <class S>
const S& source_of(const SinkhornSolution<S>& sol, Direction dir) {
    return dir == Direction::forward ? *sol.obs : *sol.fcst;
}

template <class S>
void check_self_matches(const SinkhornSolution<S>& cross, const SinkhornSolution<S>& self_src, Direction dir) {
    const auto& a = cross.params;
    const auto& b = self_src.params;
    if (a.kind != b.kind || a.rho != b.rho || a.epsilon != b.epsilon)
        throw std::invalid_argument("debiasing: cross and symmetric solutions use different parameters");
    if (!same_measure(source_of(cross, dir), *self_src.obs))
        throw std::invalid_argument("debiasing: symmetric solution is not on the source field");
}

}  // namespace detail

/// Plan-weighted mean destination minus origin, for every source point with
/// a nonzero plan marginal.
template <class S>
VectorField barycentric_projection(const SinkhornSolution<S>& sol, Direction dir) {
    const auto p = detail::project(sol, dir);
    const S& src = detail::source_of(sol, dir);
    const double L = sol.scaling.L, M = sol.scaling.M;
    VectorField vf;
    vf.direction = dir;
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (!p.valid[i]) continue;
        vf.origin_x.push_back(src.raw_x(i));
        vf.origin_y.push_back(src.raw_y(i));
        vf.dx.push_back(p.dx[i] * L);
        vf.dy.push_back(p.dy[i] * L);
        vf.weights.push_back(src.weights[i] * M);
        vf.index.push_back(i);
    }
    return vf;
}

/// Cross barycentric target minus the symmetric (self-transport) target:
/// removes the contraction bias of the entropic plan.
template <class S>
VectorField debiased_vectors(const SinkhornSolution<S>& cross, const SinkhornSolution<S>& self_src, Direction dir) {
    detail::check_self_matches(cross, self_src, dir);
    const auto pc = detail::project(cross, dir);
    const auto ps = detail::project(self_src, Direction::forward);
    const S& src = detail::source_of(cross, dir);
    const double L = cross.scaling.L, M = cross.scaling.M;
    VectorField vf;
    vf.direction = dir;
    vf.debiased = true;
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (!pc.valid[i] || !ps.valid[i]) continue;
        vf.origin_x.push_back(src.raw_x(i));
        vf.origin_y.push_back(src.raw_y(i));
        vf.dx.push_back((pc.dx[i] - ps.dx[i]) * L);
        vf.dy.push_back((pc.dy[i] - ps.dy[i]) * L);
        vf.weights.push_back(src.weights[i] * M);
        vf.index.push_back(i);
    }
    return vf;
}

/// Gradient of the scaled divergence with respect to the scaled source
/// coordinates, rebuilt from the debiased vectors v:
///   -grad_i = pi_i v_i + (pi_i - pis_i) (bary_s_i - x_i),
/// with pi and pis the cross and symmetric plan marginals. Points without a
/// vector get a zero gradient.
template <class S>
std::vector<std::array<double, 2>> sink_gradient(const SinkhornSolution<S>& cross, const SinkhornSolution<S>& self_src,
                                                 Direction dir) {
    const auto vf = debiased_vectors(cross, self_src, dir);
    const auto pc = detail::project(cross, dir);
    const auto ps = detail::project(self_src, Direction::forward);
    const double L = cross.scaling.L;
    std::vector<std::array<double, 2>> grad(detail::source_of(cross, dir).size(), {0.0, 0.0});
    for (std::size_t k = 0; k < vf.size(); ++k) {
        const std::size_t i = vf.index[k];
        const double dpi = pc.pi[i] - ps.pi[i];
        grad[i][0] = -(pc.pi[i] * vf.dx[k] / L + dpi * ps.dx[i]);
        grad[i][1] = -(pc.pi[i] * vf.dy[k] / L + dpi * ps.dy[i]);
    }
    return grad;
}

struct TransportSummary {
    double atm = 0.0;  ///< grid units
    double atd = 0.0;  ///< degrees, east 0, north 90
};

inline double direction_degrees(double dx, double dy) { return std::atan2(dy, dx) * 180.0 / std::numbers::pi; }

namespace detail {

inline double median(std::vector<double> v) {
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Mean mode: magnitude and angle of the unweighted mean vector. Median mode:
/// componentwise median vector.
inline TransportSummary atm_atd(const VectorField& vf, Averaging averaging = Averaging::mean) {
    if (vf.empty()) throw std::invalid_argument("no transported mass");
    double mx = 0.0, my = 0.0;
    if (averaging == Averaging::mean) {
        for (std::size_t k = 0; k < vf.size(); ++k) mx += vf.dx[k], my += vf.dy[k];
        mx /= static_cast<double>(vf.size());
        my /= static_cast<double>(vf.size());
    } else {
        mx = detail::median(vf.dx);
        my = detail::median(vf.dy);
    }
    return {std::hypot(mx, my), direction_degrees(mx, my)};
}

/// Mass-weighted 2D histogram of vector magnitude and direction.
struct TransportHistogram {
    std::vector<double> magnitude_edges;
    std::vector<double> direction_edges;
    std::vector<double> mass;  ///< magnitude-major: mass[m * n_dir + d]

    [[nodiscard]] std::size_t magnitude_bins() const noexcept { return magnitude_edges.size() - 1; }
    [[nodiscard]] std::size_t direction_bins() const noexcept { return direction_edges.size() - 1; }
    [[nodiscard]] double at(std::size_t m, std::size_t d) const { return mass[m * direction_bins() + d]; }

    [[nodiscard]] std::size_t occupied() const {
        return static_cast<std::size_t>(std::count_if(mass.begin(), mass.end(), [](double v) { return v > 0.0; }));
    }

    /// Center of the heaviest bin as (magnitude, direction).
    [[nodiscard]] std::pair<double, double> mode() const {
        const auto k = static_cast<std::size_t>(std::max_element(mass.begin(), mass.end()) - mass.begin());
        const std::size_t m = k / direction_bins(), d = k % direction_bins();
        return {0.5 * (magnitude_edges[m] + magnitude_edges[m + 1]), 0.5 * (direction_edges[d] + direction_edges[d + 1])};
    }
};

/// Magnitude bins cover [0, max_magnitude] (default: the largest magnitude),
/// direction bins cover [-180, 180]. Values on the top edge fall in the last bin.
inline TransportHistogram transport_histogram(const VectorField& vf, std::size_t mag_bins, std::size_t dir_bins,
                                              std::optional<double> max_magnitude = std::nullopt) {
    if (mag_bins == 0 || dir_bins == 0) throw std::invalid_argument("histogram needs at least one bin per axis");
    double top = 0.0;
    if (max_magnitude) {
        top = *max_magnitude;
    } else {
        for (std::size_t k = 0; k < vf.size(); ++k) top = std::max(top, std::hypot(vf.dx[k], vf.dy[k]));
    }
    if (!(top > 0.0)) top = 1.0;
    TransportHistogram h;
    for (std::size_t m = 0; m <= mag_bins; ++m) h.magnitude_edges.push_back(top * static_cast<double>(m) / static_cast<double>(mag_bins));
    for (std::size_t d = 0; d <= dir_bins; ++d)
        h.direction_edges.push_back(-180.0 + 360.0 * static_cast<double>(d) / static_cast<double>(dir_bins));
    h.mass.assign(mag_bins * dir_bins, 0.0);
    const double mw = top / static_cast<double>(mag_bins), dw = 360.0 / static_cast<double>(dir_bins);
    for (std::size_t k = 0; k < vf.size(); ++k) {
        const double mag = std::hypot(vf.dx[k], vf.dy[k]);
        const double ang = direction_degrees(vf.dx[k], vf.dy[k]);
        const auto m = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(mag / mw))), mag_bins - 1);
        const auto d = std::min(static_cast<std::size_t>(std::max(0.0, std::floor((ang + 180.0) / dw))), dir_bins - 1);
        h.mass[m * dir_bins + d] += vf.weights[k];
    }
    return h;
}

/// d0 / d1. Above one the forecast carries too little mass (obs mass is
/// being destroyed), below one too much. 1 when both vanish, +inf when only d1 does.
inline double marginal_imbalance_ratio(const CostBreakdown& c) {
    if (c.d1 > 0.0) return c.d0 / c.d1;
    if (c.d0 > 0.0) return std::numeric_limits<double>::infinity();
    return 1.0;
}

inline void write_vectors_csv(std::ostream& out, const VectorField& vf) {
    out << "origin_x,origin_y,dx,dy,weight\n";
    for (std::size_t k = 0; k < vf.size(); ++k)
        out << detail::format_double(vf.origin_x[k]) << ',' << detail::format_double(vf.origin_y[k]) << ','
            << detail::format_double(vf.dx[k]) << ',' << detail::format_double(vf.dy[k]) << ','
            << detail::format_double(vf.weights[k]) << '\n';
}

inline void write_histogram_csv(std::ostream& out, const TransportHistogram& h) {
    out << "mag_lo,mag_hi,dir_lo,dir_hi,mass\n";
    for (std::size_t m = 0; m < h.magnitude_bins(); ++m)
        for (std::size_t d = 0; d < h.direction_bins(); ++d)
            out << detail::format_double(h.magnitude_edges[m]) << ',' << detail::format_double(h.magnitude_edges[m + 1]) << ','
                << detail::format_double(h.direction_edges[d]) << ',' << detail::format_double(h.direction_edges[d + 1]) << ','
                << detail::format_double(h.at(m, d)) << '\n';
}

}  // namespace uotv
