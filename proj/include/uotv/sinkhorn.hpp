#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "uotv/divergences.hpp"
#include "uotv/field.hpp"
#include "uotv/kernels.hpp"
#include "uotv/support.hpp"

namespace uotv {

class no_mass_error : public std::runtime_error {
public:
    no_mass_error() : std::runtime_error("no mass: both fields are null") {}
};

/// Geometric epsilon schedule start * omega^i, floored at the target.
struct AnnealSchedule {
    double omega = 0.5;
    double start_epsilon = 1.0;
    /// Sweeps spent at every stage but the last.
    std::size_t stage_sweeps = 1;
};

/// rho and epsilon are in scaled units (multiples of L^2). rho may be +inf,
/// which turns both penalties into hard marginal constraints.
struct SolveParams {
    DivergenceKind kind = DivergenceKind::kl;
    double rho = 1.0;
    double epsilon = 0.005;
    double tolerance = 1e-12;
    std::size_t max_iters = 0;  ///< per stage; 0 selects 10 sqrt(N) + 5000
    /// Finite rho: after each half step, shift the other potential by -l and
    /// redo the update, with l maximizing the dual (closed form for KL, a
    /// bisection for TV). Same fixed point, far fewer sweeps when the masses
    /// differ.
    bool translate = true;
    std::optional<AnnealSchedule> anneal = AnnealSchedule{};

    void validate() const {
        if (!(rho >= 0.0)) throw std::invalid_argument("rho must be nonnegative");
        if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be positive");
        if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
        if (anneal) {
            if (!(anneal->omega > 0.0 && anneal->omega < 1.0)) throw std::invalid_argument("anneal omega must lie in (0,1)");
            if (!(anneal->start_epsilon > 0.0)) throw std::invalid_argument("anneal start epsilon must be positive");
        }
    }
};

/// The two presets used for the idealised 200x200 and the 601x501 grids.
inline double auto_epsilon(std::size_t n_points) { return n_points <= 100'000 ? 0.005 : 0.001; }

inline std::size_t default_max_iters(std::size_t n_points) {
    return static_cast<std::size_t>(10.0 * std::sqrt(static_cast<double>(n_points))) + 5000;
}

inline std::vector<double> anneal_epsilons(const AnnealSchedule& a, double target) {
    std::vector<double> out;
    for (int i = 0;; ++i) {
        const double e = std::max(target, a.start_epsilon * std::pow(a.omega, i));
        out.push_back(e);
        if (e <= target) break;
    }
    return out;
}

/// Proximal step of the marginal penalty applied to a softmin value.
inline double aprox(DivergenceKind kind, double rho, double eps, double s) {
    if (kind == DivergenceKind::tv) return std::clamp(s, -rho, rho);
    if (std::isinf(rho)) return s;
    return rho / (rho + eps) * s;
}

template <class Support>
struct SinkhornSolution {
    std::shared_ptr<const Support> obs, fcst;
    std::vector<double> f, g;  ///< potentials on obs and fcst points, scaled units
    SolveParams params;        ///< epsilon is the final stage's
    ScalingContext scaling;
    std::size_t iterations = 0;
    std::size_t stages = 0;
    double final_delta = 0.0;
    bool converged = false;
    bool null_case = false;
    bool symmetric = false;
};

using GridSolution = SinkhornSolution<GridSupport>;
using PointSolution = SinkhornSolution<PointSupport>;

/// Terms of the primal objective. Reported in grid units squared (scaled value times L^2).
struct CostBreakdown {
    double transport = 0.0;
    double entropy = 0.0;
    double d0 = 0.0;
    double d1 = 0.0;
    double objective = 0.0;
    bool converged = true;
};

namespace detail {

struct StageResult {
    std::size_t iterations = 0;
    double delta = 0.0;
    bool converged = false;
};

/// out_i = -eps log sum_j exp(pot_j / eps + log w_j - C_ij / eps)
template <class Op, class S>
void softmin(const Op& op, const S& src, std::span<const double> pot, double eps, std::vector<double>& h,
             std::span<double> out) {
    h.resize(src.size());
    for (std::size_t j = 0; j < src.size(); ++j) h[j] = pot[j] / eps + src.log_weights[j];
    op.lse(h, out);
    for (double& v : out) v *= -eps;
}

template <class S>
double apply_update(const S& side, std::span<const double> s, std::vector<double>& pot, const SolveParams& p, double eps,
                    double blend) {
    double delta = 0.0;
    for (std::size_t i = 0; i < pot.size(); ++i) {
        const double t = aprox(p.kind, p.rho, eps, s[i]);
        const double nv = blend == 1.0 ? t : blend * t + (1.0 - blend) * pot[i];
        if (side.weights[i] > 0.0) {
            const double d = std::abs(nv - pot[i]);
            if (!(d <= delta)) delta = d;
        }
        pot[i] = nv;
    }
    return delta;
}

/// TV line search right after side x was updated from its softmin values s:
/// y <- y - mu, x <- clamp(s + mu), the exact update for the shifted y, with
/// mu maximizing the dual. The slope is the plan mass minus the mass of y and
/// decreases in mu, so it is bisected within the box of y.
template <class S>
double tv_line_search(const S& x, std::span<const double> s, const S& y, std::span<const double> py, double rho,
                      double eps) {
    double my = 0.0, ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
    for (std::size_t j = 0; j < y.size(); ++j)
        if (y.weights[j] > 0.0) my += y.weights[j], ylo = std::min(ylo, py[j]), yhi = std::max(yhi, py[j]);
    auto slope = [&](double mu) {
        double acc = -my;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double w = x.weights[i];
            if (w == 0.0) continue;
            const double t = s[i] + mu;
            acc += t > rho ? w * std::exp((rho - t) / eps) : t < -rho ? w * std::exp((-rho - t) / eps) : w;
        }
        return acc;
    };
    const double s0 = slope(0.0);
    if (std::abs(s0) <= 1e-14 * my) return 0.0;
    double lo = 0.0, hi = 0.0;
    if (s0 > 0.0) {
        hi = std::max(0.0, rho + ylo);
        if (slope(hi) >= 0.0) return hi;
    } else {
        lo = std::min(0.0, yhi - rho);
        if (slope(lo) <= 0.0) return lo;
    }
    while (hi - lo > 1e-15 * std::max(1.0, std::abs(lo) + std::abs(hi))) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (slope(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// KL counterpart of the TV line search, in closed form.
template <class S>
void kl_shift(const S& x, std::vector<double>& px, std::span<const double> s, const S& y, std::vector<double>& py,
              double rho, double eps) {
    double la = -std::numeric_limits<double>::infinity(), lb = la;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x.weights[i] > 0.0) la = log_add_exp(la, x.log_weights[i] - s[i] / (rho + eps));
    for (std::size_t j = 0; j < y.size(); ++j)
        if (y.weights[j] > 0.0) lb = log_add_exp(lb, y.log_weights[j] - py[j] / rho);
    const double mu = (la - lb) / (1.0 / rho + 1.0 / (rho + eps));
    if (!std::isfinite(mu) || mu == 0.0) return;
    const double k = rho / (rho + eps);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = k * (s[i] + mu);
    for (double& v : py) v -= mu;
}

template <class S>
void tv_shift(const S& x, std::vector<double>& px, std::span<const double> s, const S& y, std::vector<double>& py,
              double rho, double eps) {
    const double mu = tv_line_search(x, s, y, py, rho, eps);
    if (mu == 0.0) return;
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = std::clamp(s[i] + mu, -rho, rho);
    for (double& v : py) v -= mu;
}

template <class S>
void line_shift(const S& x, std::vector<double>& px, std::span<const double> s, const S& y, std::vector<double>& py,
                const SolveParams& p, double eps) {
    if (p.kind == DivergenceKind::kl)
        kl_shift(x, px, s, y, py, p.rho, eps);
    else
        tv_shift(x, px, s, y, py, p.rho, eps);
}

template <class S>
double sup_change(const S& side, std::span<const double> now, std::span<const double> before) {
    double d = 0.0;
    for (std::size_t i = 0; i < now.size(); ++i)
        if (side.weights[i] > 0.0) {
            const double v = std::abs(now[i] - before[i]);
            if (!(v <= d)) d = v;
        }
    return d;
}

/// Alternating updates, a's potential first.
template <class S>
StageResult cross_stage(const S& a, const S& b, std::vector<double>& fa, std::vector<double>& fb, const SolveParams& p,
                        double eps, double tol, std::size_t max_iters) {
    const auto op_ab = make_operator(a, b, eps);
    const auto op_ba = make_operator(b, a, eps);
    const bool shift = p.translate && p.rho > 0.0 && std::isfinite(p.rho);
    std::vector<double> sa(a.size()), sb(b.size()), h, fa0, fb0;
    StageResult res;
    for (std::size_t it = 1; it <= max_iters; ++it) {
        fa0 = fa, fb0 = fb;
        softmin(op_ab, b, fb, eps, h, sa);
        apply_update(a, sa, fa, p, eps, 1.0);
        if (shift) line_shift(a, fa, sa, b, fb, p, eps);
        softmin(op_ba, a, fa, eps, h, sb);
        apply_update(b, sb, fb, p, eps, 1.0);
        if (shift) line_shift(b, fb, sb, a, fa, p, eps);
        res.iterations = it;
        res.delta = std::max(sup_change(a, fa, fa0), sup_change(b, fb, fb0));
        if (res.delta < tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

/// Averaged fixed-point iteration f <- (f + T(f)) / 2 for UOT(a, a).
template <class S>
StageResult symmetric_stage(const S& a, std::vector<double>& f, const SolveParams& p, double eps, double tol,
                            std::size_t max_iters) {
    const auto op = make_operator(a, a, eps);
    std::vector<double> s(a.size()), h;
    StageResult res;
    for (std::size_t it = 1; it <= max_iters; ++it) {
        softmin(op, a, f, eps, h, s);
        res.iterations = it;
        res.delta = apply_update(a, s, f, p, eps, 0.5);
        if (res.delta < tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

inline std::vector<double> stage_epsilons(const SolveParams& p) {
    return p.anneal ? anneal_epsilons(*p.anneal, p.epsilon) : std::vector<double>{p.epsilon};
}

}  // namespace detail

/// General solve on prepared supports. Warm-start potentials are used when
/// their sizes match.
template <class S>
SinkhornSolution<S> solve_supports(std::shared_ptr<const S> obs, std::shared_ptr<const S> fcst, const SolveParams& params,
                                   const ScalingContext& scaling = {}, const SinkhornSolution<S>* warm = nullptr) {
    params.validate();
    SinkhornSolution<S> sol;
    sol.obs = obs, sol.fcst = fcst, sol.params = params, sol.scaling = scaling;
    sol.f.assign(obs->size(), 0.0);
    sol.g.assign(fcst->size(), 0.0);
    if (obs->mass == 0.0 && fcst->mass == 0.0) throw no_mass_error();
    if (obs->mass == 0.0 || fcst->mass == 0.0) {
        sol.null_case = true;
        sol.converged = true;
        return sol;
    }
    if (warm && warm->f.size() == sol.f.size() && warm->g.size() == sol.g.size()) sol.f = warm->f, sol.g = warm->g;
    const std::size_t cap = params.max_iters ? params.max_iters : default_max_iters(std::max(obs->size(), fcst->size()));
    const bool obs_first = !canonical_less(*fcst, *obs);
    const auto eps_list = detail::stage_epsilons(params);
    for (std::size_t k = 0; k < eps_list.size(); ++k) {
        const bool last = k + 1 == eps_list.size();
        const std::size_t n = last ? cap : std::max<std::size_t>(1, params.anneal->stage_sweeps);
        const auto r = obs_first ? detail::cross_stage(*obs, *fcst, sol.f, sol.g, params, eps_list[k], params.tolerance, n)
                                 : detail::cross_stage(*fcst, *obs, sol.g, sol.f, params, eps_list[k], params.tolerance, n);
        sol.iterations += r.iterations;
        sol.final_delta = r.delta;
        sol.converged = r.converged;
        ++sol.stages;
    }
    return sol;
}

template <class S>
SinkhornSolution<S> solve_symmetric_support(std::shared_ptr<const S> field, const SolveParams& params,
                                            const ScalingContext& scaling = {}) {
    params.validate();
    SinkhornSolution<S> sol;
    sol.obs = sol.fcst = field;
    sol.params = params, sol.scaling = scaling, sol.symmetric = true;
    sol.f.assign(field->size(), 0.0);
    if (field->mass == 0.0) {
        sol.g = sol.f;
        sol.null_case = true;
        sol.converged = true;
        return sol;
    }
    const std::size_t cap = params.max_iters ? params.max_iters : default_max_iters(field->size());
    const auto eps_list = detail::stage_epsilons(params);
    for (std::size_t k = 0; k < eps_list.size(); ++k) {
        const bool last = k + 1 == eps_list.size();
        const std::size_t n = last ? cap : std::max<std::size_t>(1, params.anneal->stage_sweeps);
        const auto r = detail::symmetric_stage(*field, sol.f, params, eps_list[k], params.tolerance, n);
        sol.iterations += r.iterations;
        sol.final_delta = r.delta;
        sol.converged = r.converged;
        ++sol.stages;
    }
    sol.g = sol.f;
    return sol;
}

namespace detail {

/// log of sum_j w_j exp((g_j - C_ij)/eps) times the axis weights, for every
/// point i of `out`, against the potential `pot` living on `in`.
template <class Op, class S>
std::vector<double> log_row_sums(const Op& op, const S& in, std::span<const double> pot, double eps, AxisWeight wx,
                                 AxisWeight wy) {
    std::vector<double> h(in.size()), r(op.out_size());
    for (std::size_t j = 0; j < in.size(); ++j) h[j] = pot[j] / eps + in.log_weights[j];
    op.lse(h, wx, wy, r);
    return r;
}

/// Cost-weighted row sums: the cost is the sum of the two axis terms.
template <class Op, class S>
std::vector<double> log_cost_sums(const Op& op, const S& in, std::span<const double> pot, double eps) {
    auto a = log_row_sums(op, in, pot, eps, AxisWeight::cost, AxisWeight::one);
    const auto b = log_row_sums(op, in, pot, eps, AxisWeight::one, AxisWeight::cost);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = log_add_exp(a[i], b[i]);
    return a;
}

/// log of the plan marginal, log pi0_i = log w_i + f_i/eps + log row sum.
template <class S>
std::vector<double> log_marginal(const S& side, std::span<const double> pot, std::span<const double> row, double eps) {
    std::vector<double> out(side.size());
    for (std::size_t i = 0; i < side.size(); ++i)
        out[i] = side.weights[i] > 0.0 ? side.log_weights[i] + pot[i] / eps + row[i] : neg_inf;
    return out;
}

template <class S>
double penalty(DivergenceKind kind, const S& side, std::span<const double> log_pi) {
    double acc = 0.0;
    for (std::size_t i = 0; i < side.size(); ++i) {
        const double w = side.weights[i];
        if (w == 0.0) continue;
        const double p = std::exp(log_pi[i]);
        if (kind == DivergenceKind::kl)
            acc += (p > 0.0 ? p * (log_pi[i] - side.log_weights[i] - 1.0) : 0.0) + w;
        else
            acc += std::abs(p - w);
    }
    return acc;
}

struct ScaledTerms {
    CostBreakdown primal;
    double dual = 0.0;
    std::vector<double> pi0, pi1;
};

template <class S>
ScaledTerms evaluate(const SinkhornSolution<S>& sol) {
    const S& a = *sol.obs;
    const S& b = *sol.fcst;
    const auto& p = sol.params;
    const double eps = p.epsilon;
    ScaledTerms out;
    out.primal.converged = sol.converged;
    if (sol.null_case) {
        out.pi0.assign(a.size(), 0.0);
        out.pi1.assign(b.size(), 0.0);
        if (p.kind == DivergenceKind::tv) {
            out.primal.d0 = p.rho * a.mass;
            out.primal.d1 = p.rho * b.mass;
        }
        out.primal.objective = out.primal.d0 + out.primal.d1;
        out.dual = out.primal.objective;
        return out;
    }
    const auto op_ab = make_operator(a, b, eps);
    const auto op_ba = make_operator(b, a, eps);
    const auto ra = log_row_sums(op_ab, b, sol.g, eps, AxisWeight::one, AxisWeight::one);
    const auto rb = log_row_sums(op_ba, a, sol.f, eps, AxisWeight::one, AxisWeight::one);
    const auto lpa = log_marginal(a, sol.f, ra, eps);
    const auto lpb = log_marginal(b, sol.g, rb, eps);
    const auto ca = log_cost_sums(op_ab, b, sol.g, eps);
    const auto cb = log_cost_sums(op_ba, a, sol.f, eps);

    out.pi0.resize(a.size());
    out.pi1.resize(b.size());
    double ma = 0.0, mb = 0.0, fa = 0.0, gb = 0.0, ta = 0.0, tb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.pi0[i] = std::exp(lpa[i]);
        ma += out.pi0[i];
        fa += sol.f[i] * out.pi0[i];
        if (a.weights[i] > 0.0) ta += std::exp(a.log_weights[i] + sol.f[i] / eps + ca[i]);
    }
    for (std::size_t j = 0; j < b.size(); ++j) {
        out.pi1[j] = std::exp(lpb[j]);
        mb += out.pi1[j];
        gb += sol.g[j] * out.pi1[j];
        if (b.weights[j] > 0.0) tb += std::exp(b.log_weights[j] + sol.g[j] / eps + cb[j]);
    }
    const double mass_pi = 0.5 * (ma + mb);
    const double prod = a.mass * b.mass;
    auto& c = out.primal;
    c.transport = 0.5 * (ta + tb);
    c.entropy = (fa + gb) - c.transport - eps * mass_pi + eps * prod;
    if (!std::isinf(p.rho)) {
        c.d0 = p.rho * penalty(p.kind, a, lpa);
        c.d1 = p.rho * penalty(p.kind, b, lpb);
    }
    c.objective = (c.transport + c.entropy) + (c.d0 + c.d1);

    auto dual_side = [&](const S& s, const std::vector<double>& pot) {
        double acc = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s.weights[i] == 0.0) continue;
            if (p.kind == DivergenceKind::kl && !std::isinf(p.rho))
                acc += p.rho * s.weights[i] * -std::expm1(-pot[i] / p.rho);
            else
                acc += s.weights[i] * pot[i];
        }
        return acc;
    };
    out.dual = (dual_side(a, sol.f) + dual_side(b, sol.g)) - eps * (mass_pi - prod);
    return out;
}

}  // namespace detail

/// Objective terms in scaled units.
template <class S>
CostBreakdown scaled_decomposition(const SinkhornSolution<S>& sol) {
    return detail::evaluate(sol).primal;
}

/// Objective terms in reported units (times L^2).
template <class S>
CostBreakdown primal_decomposition(const SinkhornSolution<S>& sol) {
    auto c = detail::evaluate(sol).primal;
    const double l2 = sol.scaling.L * sol.scaling.L;
    c.transport *= l2, c.entropy *= l2, c.d0 *= l2, c.d1 *= l2;
    c.objective = (c.transport + c.entropy) + (c.d0 + c.d1);
    return c;
}

/// Dual objective of the current potentials, reported units. Equal to the
/// primal objective at the optimum.
template <class S>
double dual_objective(const SinkhornSolution<S>& sol) {
    return detail::evaluate(sol).dual * sol.scaling.L * sol.scaling.L;
}

/// Plan marginals on the solution supports, scaled masses.
template <class S>
std::pair<std::vector<double>, std::vector<double>> support_marginals(const SinkhornSolution<S>& sol) {
    auto t = detail::evaluate(sol);
    return {std::move(t.pi0), std::move(t.pi1)};
}

// ---------------------------------------------------------------------------
// Grid entry points

namespace detail {

inline SolveParams direct_params(SolveParams p) {
    p.anneal.reset();
    return p;
}

}  // namespace detail

/// Solves UOT(obs, fcst) on the bounding boxes of both fields. Anneals when
/// params.anneal is set.
inline GridSolution solve_uot(const DensityField& obs, const DensityField& fcst, const ScalingContext& scaling,
                              const SolveParams& params) {
    scaling.validate();
    auto a = std::make_shared<const GridSupport>(make_grid_support(obs, scaling));
    auto b = std::make_shared<const GridSupport>(make_grid_support(fcst, scaling));
    return solve_supports(std::move(a), std::move(b), params, scaling);
}

inline GridSolution anneal_run(const DensityField& obs, const DensityField& fcst, const ScalingContext& scaling,
                               const SolveParams& params) {
    if (!params.anneal) throw std::invalid_argument("anneal_run requires an anneal schedule");
    return solve_uot(obs, fcst, scaling, params);
}

inline GridSolution solve_symmetric(const DensityField& field, const ScalingContext& scaling, const SolveParams& params) {
    scaling.validate();
    return solve_symmetric_support(std::make_shared<const GridSupport>(make_grid_support(field, scaling)), params, scaling);
}

/// Plan marginals on the full grids, in input intensity units.
inline std::pair<DensityField, DensityField> plan_marginals(const GridSolution& sol) {
    auto [pi0, pi1] = support_marginals(sol);
    auto scatter = [&](const GridSupport& s, const std::vector<double>& pi) {
        std::vector<double> w(s.grid.size(), 0.0);
        for (std::size_t k = 0; k < s.size(); ++k) w[s.grid_index(k)] = pi[k] * sol.scaling.M;
        return DensityField(s.grid, std::move(w));
    };
    return {scatter(*sol.obs, pi0), scatter(*sol.fcst, pi1)};
}

/// Potentials extended to every point of the full grids by one softmin pass
/// against the other side's window.
inline std::pair<std::vector<double>, std::vector<double>> full_potentials(const GridSolution& sol) {
    auto extend = [&](const GridSupport& self, const GridSupport& other, const std::vector<double>& other_pot) {
        std::vector<double> out(self.grid.size(), 0.0);
        if (sol.null_case) return out;
        GridSupport full;
        for (std::size_t i = 0; i < self.grid.nx; ++i) full.xs.push_back(self.grid.x(i) / sol.scaling.L);
        for (std::size_t j = 0; j < self.grid.ny; ++j) full.ys.push_back(self.grid.y(j) / sol.scaling.L);
        const double eps = sol.params.epsilon;
        const auto op = make_operator(full, other, eps);
        std::vector<double> h;
        detail::softmin(op, other, other_pot, eps, h, out);
        for (double& v : out) v = aprox(sol.params.kind, sol.params.rho, eps, v);
        return out;
    };
    return {extend(*sol.obs, *sol.fcst, sol.g), extend(*sol.fcst, *sol.obs, sol.f)};
}

}  // namespace uotv
