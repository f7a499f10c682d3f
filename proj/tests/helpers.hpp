#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "uotv/uotv.hpp"

namespace uotv::testing {

/// Random nonnegative field with roughly `fill` of the cells positive.
inline DensityField random_field(std::size_t nx, std::size_t ny, std::uint64_t seed, double fill = 0.5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    DensityField f(unit_grid(nx, ny));
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i)
            if (u(rng) < fill) f.set(i, j, 0.1 + u(rng));
    return f;
}

inline PointSupport random_cloud(std::size_t n, std::uint64_t seed, double mass = 1.0, double spread = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> xs(n), ys(n), ws(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = spread * u(rng), ys[i] = spread * u(rng), ws[i] = 0.2 + u(rng);
        total += ws[i];
    }
    for (double& w : ws) w *= mass / total;
    return make_point_support(std::move(xs), std::move(ys), std::move(ws), 1.0);
}

/// Brute-force log sum_j wx wy exp(h_j - C_ij / eps) with C = |x - y|^2 / 2.
template <class Out, class In>
std::vector<double> naive_lse(const Out& out, const In& in, const std::vector<double>& h, double eps,
                              AxisWeight wx = AxisWeight::one, AxisWeight wy = AxisWeight::one) {
    std::vector<double> r(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::vector<double> terms;
        for (std::size_t j = 0; j < in.size(); ++j) {
            if (h[j] == neg_inf) continue;
            const double w = axis_weight(wx, out.x(i), in.x(j)) * axis_weight(wy, out.y(i), in.y(j));
            if (w == 0.0) continue;
            const double dx = out.x(i) - in.x(j), dy = out.y(i) - in.y(j);
            terms.push_back(h[j] + std::log(w) - 0.5 * (dx * dx + dy * dy) / eps);
        }
        r[i] = log_sum_exp(terms);
    }
    return r;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)}); }

}  // namespace uotv::testing
