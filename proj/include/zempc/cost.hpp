#pragma once

#include "zempc/types.hpp"

#include <functional>

namespace zempc {

/// Economic stage cost l_e(x, u). Not necessarily positive definite.
using EconCost = std::function<double(const Vec& x, const Vec& u)>;

// Zone tracking penalty: min over points p of the zone box of
// c1 * ||x - p||_1 + c2 * ||x - p||_2^2. The box projection minimizes both
// norms simultaneously, so the closed form is the per-axis clamp distance
// d_i = max(lo_i - x_i, x_i - hi_i, 0) combined as c1 * sum d_i + c2 * sum d_i^2.
double zone_penalty(const Vec& x, const IntervalBox& zone, double c1, double c2);

/// Per-axis clamp distances d_i (zero inside the zone).
Vec zone_distances(const Vec& x, const IntervalBox& zone);

}  // namespace zempc
