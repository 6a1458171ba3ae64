#pragma once

#include "zempc/cost.hpp"
#include "zempc/model.hpp"
#include "zempc/steady.hpp"

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace zempc {

enum class SolveStatus { optimal, max_iter, infeasible };

struct EmpcConfig {
    int N = 20;
    double c1 = 0.0;
    double c2 = 10.0;
    IntervalBox tracked_zone;   // zone penalized in the stage cost
    SteadyState terminal;       // terminal equality anchor
    IntervalBox state_box, input_box;
    EconCost econ;

    // Divisors bringing every variable to O(1) inside the solver; empty = 1.
    Vec state_scale, input_scale;

    double constraint_tol = 1e-6;    // scaled shooting/terminal residual
    double stationarity_tol = 1e-5;  // scaled projected-gradient residual
    int max_iterations = 60;
    double fd_step = 1e-6;           // forward-difference step, scaled coordinates
    double soft_terminal_weight = 1e4;
    double levenberg = 1e-7;

    [[nodiscard]] double stage_cost(const Vec& z, const Vec& v) const {
        return econ(z, v) + zone_penalty(z, tracked_zone, c1, c2);
    }

    void validate() const;
};

struct OcpSolution {
    std::vector<Vec> z;  // z(0..N), raw units; z[0] equals the measured state
    std::vector<Vec> v;  // v(0..N-1), raw units
    double objective = 0.0;
    double kkt_residual = 0.0;
    double constraint_residual = 0.0;  // max scaled shooting/terminal violation
    SolveStatus status = SolveStatus::optimal;
    int iterations = 0;
    bool soft_terminal = false;
};

// Simultaneous (multiple shooting) transcription from a measured state:
// decision variables {v(0..N-1), z(1..N)}, shooting-gap equalities
// z(k+1) - step(z(k), v(k), 0) = 0, terminal equality z(N) = x_s, box bounds
// on all z(k) and v(k), objective sum_k stage_cost(z(k), v(k)), k < N.
struct TranscribedProblem {
    const PlantModel* model = nullptr;
    const EmpcConfig* config = nullptr;
    Vec x_now;
    bool soft_terminal = false;  // escalation: terminal equality replaced by a penalty

    [[nodiscard]] int n_variables() const {
        return config->N * (model->n_u + model->n_x);
    }
    [[nodiscard]] int n_equalities() const {
        return config->N * model->n_x + (soft_terminal ? 0 : model->n_x);
    }
    [[nodiscard]] double objective_at(const std::vector<Vec>& z, const std::vector<Vec>& v) const;
};

TranscribedProblem build_ocp(const Vec& x_now, const EmpcConfig& config, const PlantModel& model);

/// SQP with a quasi-Newton (regularized Gauss-Newton) Hessian, an l1 merit
/// line search, and bounds handled inside a dual active-set QP on the
/// condensed subproblem. `warm`, when given, seeds the iterates (the caller
/// shifts); cold start is the constant (x_now, u_s) guess.
OcpSolution solve_ocp(const TranscribedProblem& problem, const OcpSolution* warm = nullptr);

/// Economic cost shifted by a storage function:
/// econ(z,v) - econ(x_s,u_s) + lambda(z) - lambda(step(z,v,0)).
double rotated_cost(const Vec& z, const Vec& v, const std::function<double(const Vec&)>& lambda,
                    const PlantModel& model, const SteadyState& terminal, const EconCost& econ);

struct StepDiagnostics {
    SolveStatus status = SolveStatus::optimal;
    int iterations = 0;
    double objective = 0.0;
    double kkt_residual = 0.0;
    double constraint_residual = 0.0;
    bool soft_terminal = false;  // step solved with the escalated problem
};

// Receding-horizon controller: solves the horizon problem at each measured
// state, applies the first input, and keeps the shifted solution as the next
// warm start. One instance owns its warm-start state (single-owner).
class ZoneEmpc {
  public:
    ZoneEmpc(PlantModel model, EmpcConfig config);

    /// Solve at x_now and return the applied input. Escalates to the soft
    /// terminal on infeasibility; throws InfeasibleError if that fails too.
    std::pair<Vec, StepDiagnostics> control_step(const Vec& x_now);

    void reset() { prev_.reset(); }
    [[nodiscard]] const EmpcConfig& config() const { return config_; }
    [[nodiscard]] const PlantModel& model() const { return model_; }
    [[nodiscard]] const std::optional<OcpSolution>& last_solution() const { return prev_; }

  private:
    PlantModel model_;
    EmpcConfig config_;
    std::optional<OcpSolution> prev_;
};

}  // namespace zempc
