#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "uotv/sinkhorn.hpp"

namespace uotv {

/// Same solver with the cost matrix materialized over the positive-mass
/// points of both fields. Throws std::length_error past 1e7 kernel entries.
inline PointSolution dense_uot(const DensityField& obs, const DensityField& fcst, const ScalingContext& scaling,
                               const SolveParams& params) {
    scaling.validate();
    auto a = std::make_shared<const PointSupport>(make_point_support(obs, scaling));
    auto b = std::make_shared<const PointSupport>(make_point_support(fcst, scaling));
    if (a->size() * b->size() > DenseOperator::max_entries)
        throw std::length_error("dense_uot: problem exceeds the 1e7 kernel entry guard");
    return solve_supports(std::move(a), std::move(b), params, scaling);
}

inline PointSolution dense_uot(const PointSupport& obs, const PointSupport& fcst, const SolveParams& params) {
    if (obs.size() * fcst.size() > DenseOperator::max_entries)
        throw std::length_error("dense_uot: problem exceeds the 1e7 kernel entry guard");
    return solve_supports(std::make_shared<const PointSupport>(obs), std::make_shared<const PointSupport>(fcst), params,
                          ScalingContext{obs.L, 1.0});
}

struct Atoms1D {
    std::vector<double> x;
    std::vector<double> w;
};

/// Exact (1/2) W_2^2 between two equal-mass measures on a line: the monotone
/// coupling of the sorted atoms is optimal.
inline double exact_w2_1d(const Atoms1D& a, const Atoms1D& b) {
    if (a.x.size() != a.w.size() || b.x.size() != b.w.size()) throw std::invalid_argument("exact_w2_1d: size mismatch");
    const double ma = std::accumulate(a.w.begin(), a.w.end(), 0.0);
    const double mb = std::accumulate(b.w.begin(), b.w.end(), 0.0);
    if (std::abs(ma - mb) > 1e-12 * std::max({1.0, ma, mb})) throw std::invalid_argument("exact_w2_1d: masses differ");
    auto order = [](const Atoms1D& s) {
        std::vector<std::size_t> idx(s.x.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return s.x[i] < s.x[j]; });
        return idx;
    };
    const auto ia = order(a), ib = order(b);
    std::size_t i = 0, j = 0;
    double ra = ia.empty() ? 0.0 : a.w[ia[0]], rb = ib.empty() ? 0.0 : b.w[ib[0]];
    double cost = 0.0;
    while (i < ia.size() && j < ib.size()) {
        const double t = std::min(ra, rb);
        const double d = a.x[ia[i]] - b.x[ib[j]];
        cost += 0.5 * t * d * d;
        ra -= t, rb -= t;
        if (ra <= 0.0 && ++i < ia.size()) ra = a.w[ia[i]];
        if (rb <= 0.0 && ++j < ib.size()) rb = b.w[ib[j]];
    }
    return cost;
}

/// Exact balanced optimal transport cost sum C_ij pi_ij, C = |x - y|^2 / 2,
/// between two point sets of at most 8 atoms each. Successive shortest paths
/// on the transportation network; every augmentation saturates a supply, a
/// demand or cancels a flow, so it terminates after a handful of passes.
inline double exact_ot_small(const PointSupport& a, const PointSupport& b) {
    const std::size_t n = a.size(), m = b.size();
    if (n > 8 || m > 8) throw std::length_error("exact_ot_small: at most 8 atoms per side");
    if (std::abs(a.mass - b.mass) > 1e-12 * std::max({1.0, a.mass, b.mass}))
        throw std::invalid_argument("exact_ot_small: instance is not balanced");
    std::vector<double> cost(n * m), flow(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double dx = a.xs[i] - b.xs[j], dy = a.ys[i] - b.ys[j];
            cost[i * m + j] = 0.5 * (dx * dx + dy * dy);
        }
    std::vector<double> supply = a.weights, demand = b.weights;
    const double tiny = 1e-15 * std::max(1.0, a.mass);
    // Nodes: 0 source, 1..n supplies, n+1..n+m demands, n+m+1 sink.
    const std::size_t nodes = n + m + 2, src = 0, snk = n + m + 1;
    const double inf = std::numeric_limits<double>::infinity();
    for (int guard = 0; guard < 10000; ++guard) {
        std::vector<double> dist(nodes, inf);
        std::vector<long> prev(nodes, -1);
        dist[src] = 0.0;
        // Bellman-Ford over the residual graph.
        for (std::size_t pass = 0; pass < nodes; ++pass) {
            bool changed = false;
            auto relax = [&](std::size_t u, std::size_t v, double c) {
                if (dist[u] + c < dist[v] - 1e-15) {
                    dist[v] = dist[u] + c;
                    prev[v] = static_cast<long>(u);
                    changed = true;
                }
            };
            for (std::size_t i = 0; i < n; ++i)
                if (supply[i] > tiny && dist[src] < inf) relax(src, 1 + i, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    if (dist[1 + i] < inf) relax(1 + i, 1 + n + j, cost[i * m + j]);
                    if (flow[i * m + j] > tiny && dist[1 + n + j] < inf) relax(1 + n + j, 1 + i, -cost[i * m + j]);
                }
            for (std::size_t j = 0; j < m; ++j)
                if (demand[j] > tiny && dist[1 + n + j] < inf) relax(1 + n + j, snk, 0.0);
            if (!changed) break;
        }
        if (dist[snk] == inf) break;
        // Bottleneck along the path.
        double push = inf;
        for (std::size_t v = snk; v != src; v = static_cast<std::size_t>(prev[v])) {
            const auto u = static_cast<std::size_t>(prev[v]);
            if (u == src) push = std::min(push, supply[v - 1]);
            else if (v == snk) push = std::min(push, demand[u - 1 - n]);
            else if (u > n) push = std::min(push, flow[(v - 1) * m + (u - 1 - n)]);
        }
        for (std::size_t v = snk; v != src; v = static_cast<std::size_t>(prev[v])) {
            const auto u = static_cast<std::size_t>(prev[v]);
            if (u == src) supply[v - 1] -= push;
            else if (v == snk) demand[u - 1 - n] -= push;
            else if (u <= n) flow[(u - 1) * m + (v - 1 - n)] += push;
            else flow[(v - 1) * m + (u - 1 - n)] -= push;
        }
    }
    double total = 0.0;
    for (std::size_t k = 0; k < n * m; ++k) total += cost[k] * flow[k];
    return total;
}

}  // namespace uotv
