#pragma once

#include "zempc/cost.hpp"
#include "zempc/grid.hpp"
#include "zempc/model.hpp"
#include "zempc/steady.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace zempc {

/// Cost evaluated inside the risk criterion.
enum class CriterionKind {
    stage_cost,     // economic cost + target-zone penalty (default)
    economic_only,  // the bare economic cost
};

/// How the disturbed end state in the criterion is formed.
enum class PerturbationKind {
    rate,  // x + (rhs(x,u,w) - rhs(x,u,0)): instantaneous rate shift (default)
    step,  // x + (step(x,u,w) - step(x,u,0)): one-step deviation
};

struct ZoneOptions {
    std::vector<int> resolution;  // cells per axis over the target zone
    int input_points = 31;        // uniform quantization of U
    CriterionKind criterion = CriterionKind::stage_cost;
    PerturbationKind perturbation = PerturbationKind::rate;
    double penalty_c1 = 0.0;   // criterion penalty weights (stage_cost kind)
    double penalty_c2 = 10.0;
    LipschitzOptions lipschitz;
    // Metric used by the graph inflation. Empty state_scale means
    // 1/width(target zone) per axis; empty disturbance_scale means 1/theta_i
    // per channel. Explicit vectors override; "none" is all-ones.
    Vec state_scale;
    Vec disturbance_scale;
};

// Over-approximating one-step abstraction on the covering: for every
// candidate cell and quantized input, the cells that can be reached under any
// admissible disturbance, stored as an index range plus an exit flag. A set
// exit means some reachable mass leaves the candidate union.
struct TransitionGraph {
    std::vector<std::size_t> cells;      // candidate cell ids, ascending
    std::vector<Vec> input_grid;         // quantized inputs
    int n_x = 0;
    // per (candidate k, input j): inclusive multi-index range, flattened as
    // [k * n_inputs * n_x + j * n_x + axis]
    std::vector<std::int32_t> post_lo, post_hi;
    std::vector<std::uint8_t> exits;     // 1 when the inflated image leaves the candidate union
    double inflation_radius = 0.0;       // scaled-metric radius actually applied

    [[nodiscard]] std::size_t n_inputs() const { return input_grid.size(); }
    [[nodiscard]] std::size_t pair_offset(std::size_t k, std::size_t j) const {
        return (k * n_inputs() + j) * static_cast<std::size_t>(n_x);
    }
};

// Output of the zone construction: surviving cells of the covering plus a
// convex inner representation consumed by the controller, with everything
// needed to audit the construction.
struct EconomicZone {
    double risk_factor = 0.0;
    FiniteCovering covering;
    std::vector<char> candidate_mask;  // cells passing the risk criterion
    std::vector<char> kept_mask;       // invariance kernel of the candidates
    std::vector<std::int32_t> certified_input;  // per cell: input index certifying invariance (-1 outside)
    IntervalBox inner_box;
    std::vector<Vec> input_grid;
    LipschitzEstimate lipschitz;
    Vec state_scale, disturbance_scale;  // metric used by the graph inflation
    Vec theta;
    CriterionKind criterion = CriterionKind::stage_cost;
    PerturbationKind perturbation = PerturbationKind::rate;
    double penalty_c1 = 0.0, penalty_c2 = 10.0;
    std::optional<SteadyState> steady;

    [[nodiscard]] std::size_t candidate_count() const;
    [[nodiscard]] std::size_t kept_count() const;
    [[nodiscard]] bool contains(const Vec& x) const;  // membership in the kept-cell union
};

/// Uniform input grid over a box (per-axis counts; 1 means the midpoint).
std::vector<Vec> make_input_grid(const IntervalBox& input_box, int points_per_axis);

/// Risk criterion filter: a cell survives iff every sampled point of the cell
/// (corners + center) admits a grid input whose criterion cost stays <= delta
/// for every sampled disturbance (box vertices + center).
std::vector<char> economic_filter(const FiniteCovering& covering, const PlantModel& model,
                                  const ConstraintSpec& spec, const EconCost& econ,
                                  const IntervalBox& target_zone, double delta,
                                  const std::vector<Vec>& input_grid, const ZoneOptions& opts);

/// One-step abstraction over the candidate cells: corner + center images of
/// each cell under the nominal step, bounding box, inflated by
/// L_x * r_cell + sqrt(n_x) * L_w * theta_eff in the scaled metric.
TransitionGraph build_transition_graph(const std::vector<char>& candidate_mask,
                                       const FiniteCovering& covering, const PlantModel& model,
                                       const ConstraintSpec& spec, const LipschitzEstimate& est,
                                       const std::vector<Vec>& input_grid,
                                       const Vec& state_scale, const Vec& disturbance_scale);

/// Greatest fixed point of the one-step containment operator: repeatedly
/// delete cells with no input whose successors (and no exit) stay inside the
/// surviving set. Empty output is valid. `certified_input`, when given, gets
/// the first certifying input index per surviving cell (-1 elsewhere).
std::vector<char> invariance_kernel(const std::vector<char>& candidate_mask,
                                    const FiniteCovering& covering, const TransitionGraph& graph,
                                    std::vector<std::int32_t>* certified_input = nullptr);

/// Maximum-volume axis-aligned box of kept cells. Exact grid dynamic
/// programming for dim <= 2, greedy expansion from `seed_cell` (default: the
/// kept cell nearest the mask centroid) above. Throws ZoneConstructionError
/// on an empty mask.
IntervalBox extract_inner_box(const std::vector<char>& kept_mask, const FiniteCovering& covering,
                              std::optional<std::size_t> seed_cell = std::nullopt);

/// Full pipeline: covering -> risk filter -> abstraction -> kernel -> inner box.
EconomicZone compute_economic_zone(const PlantModel& model, const ConstraintSpec& spec,
                                   const EconCost& econ, const IntervalBox& target_zone,
                                   double delta, const ZoneOptions& opts);

struct ZoneAudit {
    bool ok = true;
    std::vector<std::string> failures;
    void fail(std::string msg) {
        ok = false;
        failures.push_back(std::move(msg));
    }
};

/// Independent re-check of a constructed zone: containment chain, criterion
/// on every kept cell's samples, and the inflated image of every kept cell
/// under its certified input staying inside the kept union.
ZoneAudit verify_zone(const EconomicZone& zone, const PlantModel& model, const ConstraintSpec& spec,
                      const EconCost& econ, const IntervalBox& target_zone);

/// Text artifact round trip (documented format, see save_zone).
void save_zone(const EconomicZone& zone, const IntervalBox& target_zone, const std::string& path);
struct LoadedZone {
    EconomicZone zone;
    IntervalBox target_zone;
};
LoadedZone load_zone(const std::string& path);

/// Cell centers with keep flags, one row per cell, for plotting.
void write_zone_csv(const EconomicZone& zone, const std::vector<std::string>& state_names,
                    const std::string& path);

}  // namespace zempc
