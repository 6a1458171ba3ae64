#pragma once

#include "zempc/cost.hpp"
#include "zempc/model.hpp"

namespace zempc {

/// Optimal steady operating pair restricted to a zone box.
struct SteadyState {
    Vec x_s;
    Vec u_s;
    double cost = 0.0;      // economic cost at (x_s, u_s)
    double residual = 0.0;  // |step(x_s, u_s, 0) - x_s|, scaled
    bool on_boundary = false;  // x_s touches the zone boundary (see solve notes)
};

struct SteadyStateOptions {
    int input_grid = 200;       // coarse scan points per input axis
    int newton_max_iter = 60;
    double fixed_point_tol = 1e-10;  // scaled residual target of the polish phase
    int polish_rounds = 60;     // halving rounds of the coordinate descent on u
    Vec state_scale;            // diagonal scaling for residual norms (empty = widths of zone box)
};

/// Minimize the economic cost over steady pairs: grid over u with a damped
/// Newton fixed-point solve per input (Picard fallback), feasibility filter
/// against the zone box, then local coordinate descent on u around the best
/// grid point. Ties break toward the smallest input. Throws InfeasibleError
/// when no fixed point lands inside the zone.
SteadyState solve_steady_state(const PlantModel& model, const IntervalBox& zone_box,
                               const IntervalBox& input_box, const EconCost& econ,
                               const SteadyStateOptions& opts = {});

}  // namespace zempc
