#pragma once

#include "zempc/types.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace zempc {

using RhsFn = std::function<Vec(const Vec& x, const Vec& u, const Vec& w)>;

// Discrete-time uncertain plant. The usual route is a continuous-time right
// hand side advanced by one classical RK4 step of length h with u and w held
// constant (zero-order hold). Test systems that are natively discrete maps
// set `transition` instead, which bypasses the integrator.
struct PlantModel {
    int n_x = 0, n_u = 0, n_w = 0;
    double h = 0.0;     // sampling interval (time units of rhs)
    RhsFn rhs;          // (x, u, w_deviation) -> dx/dt
    RhsFn transition;   // optional explicit discrete map x+ = T(x, u, w)

    std::vector<std::string> state_names, input_names, disturbance_names;

    [[nodiscard]] bool discrete() const { return static_cast<bool>(transition); }
};

/// One-step advance. Throws ModelEvalError on non-finite stages.
Vec step(const PlantModel& model, const Vec& x, const Vec& u, const Vec& w);

/// Continuous-time rate shift induced by the disturbance: rhs(x,u,w) - rhs(x,u,0).
/// For discrete-map models falls back to the one-step deviation.
Vec rate_deviation(const PlantModel& model, const Vec& x, const Vec& u, const Vec& w);

// Operating constraints. The disturbance box is stored in deviation
// coordinates: the zero vector is the nominal disturbance and must lie in the
// interior of the box.
struct ConstraintSpec {
    IntervalBox state_box;        // X
    IntervalBox input_box;        // U
    IntervalBox disturbance_box;  // W (deviations from nominal)

    /// Per-dimension half-widths of W: |w_i| <= theta_i for every w in W.
    [[nodiscard]] Vec theta() const {
        Vec t(disturbance_box.dim());
        for (int i = 0; i < disturbance_box.dim(); ++i) {
            t[i] = std::max(std::abs(disturbance_box.lo[i]), std::abs(disturbance_box.hi[i]));
        }
        return t;
    }

    void validate() const;
};

/// Sampled Lipschitz constants of the one-step map, inflated by `margin`.
struct LipschitzEstimate {
    double L_x = 0.0;   // w.r.t. the state, at fixed input and nominal disturbance
    double L_w = 0.0;   // w.r.t. the disturbance, at fixed state and input
    long sample_count = 0;
    double margin = 1.0;
};

struct LipschitzOptions {
    long n_samples = 10000;
    std::uint64_t seed = 0;
    double margin = 1.2;
    // Optional diagonal metrics: distances are measured on (scale .* x) and
    // (w_scale .* w). Empty means the identity metric.
    Vec state_scale;
    Vec disturbance_scale;
};

/// Max-ratio estimate of L_x and L_w over sampled points of X x U x W.
/// Deterministic given the seed. Throws Error on degenerate sampling.
LipschitzEstimate estimate_lipschitz(const PlantModel& model, const ConstraintSpec& spec,
                                     const LipschitzOptions& opts);

/// One-step deviation bound sqrt(n_x) * L_w * theta between the disturbed and
/// nominal trajectories started from the same state.
double one_step_deviation_bound(const LipschitzEstimate& est, double theta, int n_x);

// ---------------------------------------------------------------------------
// CSTR benchmark: single first-order irreversible exothermic reaction with a
// cooling jacket. States [C_A mol/L, T K], input T_c K, disturbances
// [dC_Af mol/L, dT_f K] as deviations from the nominal feed.
// ---------------------------------------------------------------------------

struct CstrParams {
    double q = 100.0;        // L/min
    double V = 100.0;        // L
    double C_Af = 1.0;       // mol/L (nominal feed concentration)
    double T_f = 350.0;      // K (nominal feed temperature)
    double E_over_R = 8750.0;  // K
    double k0 = 7.2e10;      // 1/min
    double dH_neg = 5.0e4;   // J/mol (-dH)
    double UA = 5.0e4;       // J/(min K)
    double c_p = 0.239;      // J/(g K)
    double rho = 1000.0;     // g/L
};

/// Balance equations; returns [dC_A/dt, dT/dt].
Vec cstr_rhs(const Vec& x, const Vec& u, const Vec& w_dev, const CstrParams& p);

PlantModel make_cstr_model(const CstrParams& params = {}, double h = 0.1);

/// Hard constraints of the benchmark: C_A in [0,1], T in [345,355],
/// T_c in [285,315], feed deviations in [-0.1,0.1] x [-2,2].
ConstraintSpec cstr_constraints();

/// Benchmark target zone: concentration free, T in [348, 352].
IntervalBox cstr_target_zone();

}  // namespace zempc
