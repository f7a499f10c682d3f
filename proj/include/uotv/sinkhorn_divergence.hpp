#pragma once

#include <memory>
#include <utility>

#include "uotv/sinkhorn.hpp"

namespace uotv {

/// Debiased divergence and its parts, reported units (grid units squared).
template <class S>
struct SinkReport {
    double sink = 0.0;
    double uot = 0.0;       ///< cross objective
    double uot_obs = 0.0;   ///< UOT(obs, obs)
    double uot_fcst = 0.0;  ///< UOT(fcst, fcst)
    double mass_term = 0.0;
    SinkhornSolution<S> cross, self_obs, self_fcst;
    CostBreakdown breakdown;  ///< primal terms of the cross solve
    SolveParams params;
    bool null_case = false;
    bool converged = true;
};

using GridSinkReport = SinkReport<GridSupport>;

/// UOT value of a solution in reported units. Evaluated through the dual,
/// which equals the primal optimum and is second-order accurate in the
/// potentials; the primal TV penalty is only first-order accurate.
template <class S>
double uot_value(const SinkhornSolution<S>& sol) {
    return dual_objective(sol);
}

/// Sink = UOT(O,F) - UOT(O,O)/2 - UOT(F,F)/2 + eps/2 (m_O - m_F)^2.
/// With one null field the score is the cross objective itself: rho times the
/// remaining mass for TV, zero for KL.
template <class S>
SinkReport<S> assemble_sink(SinkhornSolution<S> cross, SinkhornSolution<S> self_obs, SinkhornSolution<S> self_fcst) {
    SinkReport<S> r;
    const double l2 = cross.scaling.L * cross.scaling.L;
    r.params = cross.params;
    r.breakdown = primal_decomposition(cross);
    r.null_case = cross.null_case;
    if (cross.null_case) {
        r.uot = r.breakdown.objective;
        r.sink = r.uot;
        r.converged = true;
    } else {
        const double dm = cross.obs->mass - cross.fcst->mass;
        r.uot = uot_value(cross);
        r.uot_obs = uot_value(self_obs);
        r.uot_fcst = uot_value(self_fcst);
        r.mass_term = 0.5 * cross.params.epsilon * dm * dm * l2;
        r.sink = r.uot - (0.5 * r.uot_obs + 0.5 * r.uot_fcst) + r.mass_term;
        r.converged = cross.converged && self_obs.converged && self_fcst.converged;
    }
    r.cross = std::move(cross);
    r.self_obs = std::move(self_obs);
    r.self_fcst = std::move(self_fcst);
    return r;
}

/// Divergence on prepared supports. Symmetric solves passed in are reused
/// (they must share params and supports with the cross problem).
template <class S>
SinkReport<S> sinkhorn_divergence(std::shared_ptr<const S> obs, std::shared_ptr<const S> fcst, const SolveParams& params,
                                  const ScalingContext& scaling = {}, const SinkhornSolution<S>* self_obs = nullptr,
                                  const SinkhornSolution<S>* self_fcst = nullptr) {
    auto cross = solve_supports(obs, fcst, params, scaling);
    if (cross.null_case) return assemble_sink(std::move(cross), SinkhornSolution<S>{}, SinkhornSolution<S>{});
    auto so = self_obs ? *self_obs : solve_symmetric_support(obs, params, scaling);
    SinkhornSolution<S> sf;
    if (self_fcst)
        sf = *self_fcst;
    else if (same_measure(*obs, *fcst))
        sf = so;
    else
        sf = solve_symmetric_support(fcst, params, scaling);
    return assemble_sink(std::move(cross), std::move(so), std::move(sf));
}

inline GridSinkReport sinkhorn_divergence(const DensityField& obs, const DensityField& fcst, const ScalingContext& scaling,
                                          const SolveParams& params) {
    scaling.validate();
    auto a = std::make_shared<const GridSupport>(make_grid_support(obs, scaling));
    auto b = std::make_shared<const GridSupport>(make_grid_support(fcst, scaling));
    return sinkhorn_divergence(std::move(a), std::move(b), params, scaling);
}

/// Sink(obs, fcst) and Sink(fcst, obs).
inline std::pair<double, double> sink_symmetry_check(const DensityField& obs, const DensityField& fcst,
                                                     const ScalingContext& scaling, const SolveParams& params) {
    const double fwd = sinkhorn_divergence(obs, fcst, scaling, params).sink;
    const double bwd = sinkhorn_divergence(fcst, obs, scaling, params).sink;
    return {fwd, bwd};
}

}  // namespace uotv
