#include "zempc/cost.hpp"

#include <algorithm>

namespace zempc {

Vec zone_distances(const Vec& x, const IntervalBox& zone) {
    Vec d(zone.dim());
    for (int i = 0; i < zone.dim(); ++i) {
        d[i] = std::max({zone.lo[i] - x[i], x[i] - zone.hi[i], 0.0});
    }
    return d;
}

double zone_penalty(const Vec& x, const IntervalBox& zone, double c1, double c2) {
    double lin = 0.0, quad = 0.0;
    for (int i = 0; i < zone.dim(); ++i) {
        double d = std::max({zone.lo[i] - x[i], x[i] - zone.hi[i], 0.0});
        lin += d;
        quad += d * d;
    }
    return c1 * lin + c2 * quad;
}

}  // namespace zempc
