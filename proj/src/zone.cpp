#include "zempc/zone.hpp"

#include "zempc/util.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>

namespace zempc {

namespace {

Vec default_state_scale(const IntervalBox& zone_box, const Vec& given) {
    if (given.size() > 0) return given;
    Vec s(zone_box.dim());
    for (int i = 0; i < zone_box.dim(); ++i) s[i] = 1.0 / zone_box.width(i);
    return s;
}

Vec default_disturbance_scale(const Vec& theta, const Vec& given) {
    if (given.size() > 0) return given;
    Vec s(theta.size());
    for (int i = 0; i < theta.size(); ++i) s[i] = theta[i] > 0.0 ? 1.0 / theta[i] : 1.0;
    return s;
}

/// Corners plus center of a box.
std::vector<Vec> box_samples(const IntervalBox& box) {
    std::vector<Vec> pts;
    pts.reserve(box.num_vertices() + 1);
    for (unsigned m = 0; m < box.num_vertices(); ++m) pts.push_back(box.vertex(m));
    pts.push_back(box.center());
    return pts;
}

Vec perturbed_state(const PlantModel& model, const Vec& x, const Vec& u, const Vec& w,
                    PerturbationKind kind) {
    if (kind == PerturbationKind::rate) return x + rate_deviation(model, x, u, w);
    Vec w0 = Vec::Zero(w.size());
    return x + (step(model, x, u, w) - step(model, x, u, w0));
}

}  // namespace

std::size_t EconomicZone::candidate_count() const {
    return static_cast<std::size_t>(std::count(candidate_mask.begin(), candidate_mask.end(), char(1)));
}

std::size_t EconomicZone::kept_count() const {
    return static_cast<std::size_t>(std::count(kept_mask.begin(), kept_mask.end(), char(1)));
}

bool EconomicZone::contains(const Vec& x) const {
    auto idx = covering.locate(x);
    return idx && kept_mask[*idx];
}

std::vector<Vec> make_input_grid(const IntervalBox& input_box, int points_per_axis) {
    if (points_per_axis < 1) throw ConfigError("zone.input_grid_points", "need at least one input point");
    const int d = input_box.dim();
    std::vector<int> counts(static_cast<std::size_t>(d), points_per_axis);
    std::size_t total = 1;
    for (int c : counts) total *= static_cast<std::size_t>(c);
    std::vector<Vec> grid;
    grid.reserve(total);
    std::vector<int> mi(static_cast<std::size_t>(d), 0);
    for (std::size_t n = 0; n < total; ++n) {
        Vec u(d);
        for (int i = 0; i < d; ++i) {
            u[i] = counts[static_cast<std::size_t>(i)] == 1
                       ? input_box.center()[i]
                       : input_box.lo[i] + input_box.width(i) * mi[static_cast<std::size_t>(i)] /
                                               (counts[static_cast<std::size_t>(i)] - 1);
        }
        grid.push_back(u);
        for (int i = d - 1; i >= 0; --i) {
            if (++mi[static_cast<std::size_t>(i)] < counts[static_cast<std::size_t>(i)]) break;
            mi[static_cast<std::size_t>(i)] = 0;
        }
    }
    return grid;
}

std::vector<char> economic_filter(const FiniteCovering& covering, const PlantModel& model,
                                  const ConstraintSpec& spec, const EconCost& econ,
                                  const IntervalBox& target_zone, double delta,
                                  const std::vector<Vec>& input_grid, const ZoneOptions& opts) {
    std::vector<char> keep(covering.size(), char(0));
    if (input_grid.empty()) throw ConfigError("zone.input_grid_points", "input grid must be nonempty");
    if (std::isinf(delta) && delta > 0.0) {
        std::fill(keep.begin(), keep.end(), char(1));
        return keep;
    }

    auto criterion = [&](const Vec& x, const Vec& u) {
        double c = econ(x, u);
        if (opts.criterion == CriterionKind::stage_cost) {
            c += zone_penalty(x, target_zone, opts.penalty_c1, opts.penalty_c2);
        }
        return c;
    };

    const auto w_samples = box_samples(spec.disturbance_box);

    parallel_for(covering.size(), [&](std::size_t idx) {
        const auto cell_points = box_samples(covering.cell(idx));
        for (const Vec& x : cell_points) {
            bool some_input_ok = false;
            for (const Vec& u : input_grid) {
                bool all_w_ok = true;
                for (const Vec& w : w_samples) {
                    if (criterion(perturbed_state(model, x, u, w, opts.perturbation), u) > delta) {
                        all_w_ok = false;
                        break;
                    }
                }
                if (all_w_ok) {
                    some_input_ok = true;
                    break;
                }
            }
            if (!some_input_ok) return;  // this sample point kills the cell
        }
        keep[idx] = char(1);
    });
    return keep;
}

TransitionGraph build_transition_graph(const std::vector<char>& candidate_mask,
                                       const FiniteCovering& covering, const PlantModel& model,
                                       const ConstraintSpec& spec, const LipschitzEstimate& est,
                                       const std::vector<Vec>& input_grid,
                                       const Vec& state_scale, const Vec& disturbance_scale) {
    TransitionGraph g;
    g.n_x = covering.dim();
    g.input_grid = input_grid;
    for (std::size_t i = 0; i < covering.size(); ++i) {
        if (candidate_mask[i]) g.cells.push_back(i);
    }

    const Vec sx = default_state_scale(covering.base(), state_scale);
    const Vec sw = default_disturbance_scale(spec.theta(), disturbance_scale);

    // deviation bound in the scaled metric plus the intra-cell spread
    const double r_cell = sx.cwiseProduct(covering.cell_half_widths()).norm();
    const double theta_eff = sw.cwiseProduct(spec.theta()).lpNorm<Eigen::Infinity>();
    const double rho = est.L_x * r_cell + one_step_deviation_bound(est, theta_eff, model.n_x);
    g.inflation_radius = rho;

    const std::size_t n_in = input_grid.size();
    const auto dim = static_cast<std::size_t>(g.n_x);
    g.post_lo.assign(g.cells.size() * n_in * dim, 0);
    g.post_hi.assign(g.cells.size() * n_in * dim, -1);
    g.exits.assign(g.cells.size() * n_in, std::uint8_t(0));

    const MaskSums cand_sums(covering, candidate_mask);
    const Vec w0 = Vec::Zero(model.n_w);

    parallel_for(g.cells.size(), [&](std::size_t k) {
        const auto cell_points = box_samples(covering.cell(g.cells[k]));
        std::vector<int> lo_mi, hi_mi;
        for (std::size_t j = 0; j < n_in; ++j) {
            Vec img_lo, img_hi;
            bool bad = false;
            try {
                for (const Vec& p : cell_points) {
                    Vec y = step(model, p, input_grid[j], w0);
                    if (img_lo.size() == 0) {
                        img_lo = y;
                        img_hi = y;
                    } else {
                        img_lo = img_lo.cwiseMin(y);
                        img_hi = img_hi.cwiseMax(y);
                    }
                }
            } catch (const ModelEvalError&) {
                bad = true;  // unreachable under any certificate: treat as exiting
            }
            const std::size_t off = g.pair_offset(k, j);
            if (bad) {
                g.exits[k * n_in + j] = 1;
                continue;
            }
            IntervalBox inflated(img_lo, img_hi);
            for (int i = 0; i < g.n_x; ++i) {
                inflated.lo[i] -= rho / sx[i];
                inflated.hi[i] += rho / sx[i];
            }
            bool outside = !covering.base().contains_box(inflated);
            if (covering.cell_range(inflated, lo_mi, hi_mi)) {
                std::int64_t cells_in_range = 1;
                for (int i = 0; i < g.n_x; ++i) {
                    g.post_lo[off + static_cast<std::size_t>(i)] = lo_mi[static_cast<std::size_t>(i)];
                    g.post_hi[off + static_cast<std::size_t>(i)] = hi_mi[static_cast<std::size_t>(i)];
                    cells_in_range *= hi_mi[static_cast<std::size_t>(i)] - lo_mi[static_cast<std::size_t>(i)] + 1;
                }
                // touching any non-candidate cell also counts as leaving
                if (cand_sums.count(lo_mi, hi_mi) != cells_in_range) outside = true;
            } else {
                outside = true;
            }
            if (outside) g.exits[k * n_in + j] = 1;
        }
    });
    return g;
}

std::vector<char> invariance_kernel(const std::vector<char>& candidate_mask,
                                    const FiniteCovering& covering, const TransitionGraph& graph,
                                    std::vector<std::int32_t>* certified_input) {
    std::vector<char> survivors = candidate_mask;
    const std::size_t n_in = graph.n_inputs();
    const auto dim = static_cast<std::size_t>(graph.n_x);

    bool changed = true;
    while (changed) {
        changed = false;
        const MaskSums sums(covering, survivors);
        std::vector<char> next = survivors;
        std::atomic<bool> any_deleted{false};
        parallel_for(graph.cells.size(), [&](std::size_t k) {
            const std::size_t cell = graph.cells[k];
            if (!survivors[cell]) return;
            std::vector<int> lo(dim), hi(dim);
            bool certified = false;
            for (std::size_t j = 0; j < n_in && !certified; ++j) {
                if (graph.exits[k * n_in + j]) continue;
                const std::size_t off = graph.pair_offset(k, j);
                std::int64_t range_cells = 1;
                for (std::size_t i = 0; i < dim; ++i) {
                    lo[i] = graph.post_lo[off + i];
                    hi[i] = graph.post_hi[off + i];
                    range_cells *= hi[i] - lo[i] + 1;
                }
                certified = sums.count(lo, hi) == range_cells;
            }
            if (!certified) {
                next[cell] = char(0);
                any_deleted.store(true, std::memory_order_relaxed);
            }
        });
        // deletions apply between sweeps so the result is thread-count independent
        if (any_deleted.load()) {
            survivors.swap(next);
            changed = true;
        }
    }

    if (certified_input) {
        certified_input->assign(covering.size(), -1);
        const MaskSums sums(covering, survivors);
        std::vector<int> lo(dim), hi(dim);
        for (std::size_t k = 0; k < graph.cells.size(); ++k) {
            const std::size_t cell = graph.cells[k];
            if (!survivors[cell]) continue;
            for (std::size_t j = 0; j < n_in; ++j) {
                if (graph.exits[k * n_in + j]) continue;
                const std::size_t off = graph.pair_offset(k, j);
                std::int64_t range_cells = 1;
                for (std::size_t i = 0; i < dim; ++i) {
                    lo[i] = graph.post_lo[off + i];
                    hi[i] = graph.post_hi[off + i];
                    range_cells *= hi[i] - lo[i] + 1;
                }
                if (sums.count(lo, hi) == range_cells) {
                    (*certified_input)[cell] = static_cast<std::int32_t>(j);
                    break;
                }
            }
        }
    }
    return survivors;
}

namespace {

/// Largest all-kept rectangle of a 2-D mask, histogram-stack method.
/// Returns {r0, c0, r1, c1} inclusive or nullopt on an empty mask.
std::optional<std::array<int, 4>> max_rectangle_2d(const std::vector<char>& mask, int rows, int cols,
                                                   const FiniteCovering& cov) {
    std::vector<int> height(static_cast<std::size_t>(cols), 0);
    long long best_area = 0;
    std::array<int, 4> best{};
    std::vector<int> mi(2);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            mi[0] = r;
            mi[1] = c;
            height[static_cast<std::size_t>(c)] =
                mask[cov.flat_index(mi)] ? height[static_cast<std::size_t>(c)] + 1 : 0;
        }
        // max rectangle in histogram with a sentinel column
        std::vector<int> stack;
        for (int c = 0; c <= cols; ++c) {
            int h = c < cols ? height[static_cast<std::size_t>(c)] : 0;
            while (!stack.empty() && height[static_cast<std::size_t>(stack.back())] >= h) {
                int top = stack.back();
                stack.pop_back();
                int hh = height[static_cast<std::size_t>(top)];
                int left = stack.empty() ? 0 : stack.back() + 1;
                long long area = static_cast<long long>(hh) * (c - left);
                if (hh > 0 && area > best_area) {
                    best_area = area;
                    best = {r - hh + 1, left, r, c - 1};
                }
            }
            stack.push_back(c);
        }
    }
    if (best_area == 0) return std::nullopt;
    return best;
}

}  // namespace

IntervalBox extract_inner_box(const std::vector<char>& kept_mask, const FiniteCovering& covering,
                              std::optional<std::size_t> seed_cell) {
    const std::size_t kept =
        static_cast<std::size_t>(std::count(kept_mask.begin(), kept_mask.end(), char(1)));
    if (kept == 0) {
        throw ZoneConstructionError(
            "invariance kernel is empty: raise the risk factor or refine the covering");
    }

    if (covering.dim() == 1) {
        int best_len = 0, best_start = 0, run = 0, start = 0;
        for (int i = 0; i < covering.resolution()[0]; ++i) {
            if (kept_mask[static_cast<std::size_t>(i)]) {
                if (run == 0) start = i;
                ++run;
                if (run > best_len) {
                    best_len = run;
                    best_start = start;
                }
            } else {
                run = 0;
            }
        }
        Vec lo(1), hi(1);
        lo[0] = covering.cell(static_cast<std::size_t>(best_start)).lo[0];
        hi[0] = covering.cell(static_cast<std::size_t>(best_start + best_len - 1)).hi[0];
        return {lo, hi};
    }

    if (covering.dim() == 2) {
        auto rect = max_rectangle_2d(kept_mask, covering.resolution()[0], covering.resolution()[1], covering);
        auto [r0, c0, r1, c1] = *rect;  // nonempty mask guarantees a value
        IntervalBox a = covering.cell(covering.flat_index({r0, c0}));
        IntervalBox b = covering.cell(covering.flat_index({r1, c1}));
        return {a.lo, b.hi};
    }

    // higher dimensions: greedy axis-by-axis growth from a seed cell
    std::size_t seed = seed_cell.value_or(0);
    if (!seed_cell) {
        Vec centroid = Vec::Zero(covering.dim());
        for (std::size_t i = 0; i < covering.size(); ++i) {
            if (kept_mask[i]) centroid += covering.cell_center(i);
        }
        centroid /= static_cast<double>(kept);
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < covering.size(); ++i) {
            if (!kept_mask[i]) continue;
            double d = (covering.cell_center(i) - centroid).norm();
            if (d < best_d) {
                best_d = d;
                seed = i;
            }
        }
    }
    if (!kept_mask[seed]) throw ZoneConstructionError("seed cell is not in the kept set");

    std::vector<int> lo = covering.multi_index(seed);
    std::vector<int> hi = lo;
    const MaskSums sums(covering, kept_mask);
    auto full = [&](const std::vector<int>& l, const std::vector<int>& h) {
        std::int64_t cells = 1;
        for (std::size_t i = 0; i < l.size(); ++i) cells *= h[i] - l[i] + 1;
        return sums.count(l, h) == cells;
    };
    bool grew = true;
    while (grew) {
        grew = false;
        for (int axis = 0; axis < covering.dim(); ++axis) {
            auto a = static_cast<std::size_t>(axis);
            if (hi[a] + 1 < covering.resolution()[a]) {
                ++hi[a];
                if (full(lo, hi)) grew = true; else --hi[a];
            }
            if (lo[a] > 0) {
                --lo[a];
                if (full(lo, hi)) grew = true; else ++lo[a];
            }
        }
    }
    IntervalBox a = covering.cell(covering.flat_index(lo));
    IntervalBox b = covering.cell(covering.flat_index(hi));
    return {a.lo, b.hi};
}

EconomicZone compute_economic_zone(const PlantModel& model, const ConstraintSpec& spec,
                                   const EconCost& econ, const IntervalBox& target_zone,
                                   double delta, const ZoneOptions& opts) {
    spec.validate();
    if (!spec.state_box.contains_box(target_zone, 1e-12)) {
        throw ConfigError("zone.target_box", "target zone must lie inside the state box");
    }

    EconomicZone zone;
    zone.risk_factor = delta;
    zone.covering = build_covering(target_zone, opts.resolution);
    zone.input_grid = make_input_grid(spec.input_box, opts.input_points);
    zone.theta = spec.theta();
    zone.criterion = opts.criterion;
    zone.perturbation = opts.perturbation;
    zone.penalty_c1 = opts.penalty_c1;
    zone.penalty_c2 = opts.penalty_c2;
    zone.state_scale = default_state_scale(target_zone, opts.state_scale);
    zone.disturbance_scale = default_disturbance_scale(zone.theta, opts.disturbance_scale);

    LipschitzOptions lip = opts.lipschitz;
    lip.state_scale = zone.state_scale;
    lip.disturbance_scale = zone.disturbance_scale;
    zone.lipschitz = estimate_lipschitz(model, spec, lip);

    zone.candidate_mask = economic_filter(zone.covering, model, spec, econ, target_zone, delta,
                                          zone.input_grid, opts);

    TransitionGraph graph = build_transition_graph(zone.candidate_mask, zone.covering, model, spec,
                                                   zone.lipschitz, zone.input_grid,
                                                   zone.state_scale, zone.disturbance_scale);
    zone.kept_mask = invariance_kernel(zone.candidate_mask, zone.covering, graph, &zone.certified_input);
    zone.inner_box = extract_inner_box(zone.kept_mask, zone.covering);
    return zone;
}

ZoneAudit verify_zone(const EconomicZone& zone, const PlantModel& model, const ConstraintSpec& spec,
                      const EconCost& econ, const IntervalBox& target_zone) {
    ZoneAudit audit;
    const auto& cov = zone.covering;

    // containment chain inner box <= kernel union <= candidate union <= target zone
    for (std::size_t i = 0; i < cov.size(); ++i) {
        if (zone.kept_mask[i] && !zone.candidate_mask[i]) {
            audit.fail("kept cell " + std::to_string(i) + " is not a criterion candidate");
        }
    }
    std::vector<int> lo, hi;
    if (!cov.cell_range(zone.inner_box, lo, hi)) {
        audit.fail("inner box does not intersect the covering");
    } else {
        // shrink the query box marginally so shared faces do not pull in neighbors
        IntervalBox shrunk = zone.inner_box;
        for (int i = 0; i < cov.dim(); ++i) {
            double eps = 1e-9 * cov.cell_width(i);
            shrunk.lo[i] += eps;
            shrunk.hi[i] -= eps;
        }
        cov.cell_range(shrunk, lo, hi);
        MaskSums kept_sums(cov, zone.kept_mask);
        std::int64_t cells = 1;
        for (std::size_t i = 0; i < lo.size(); ++i) cells *= hi[i] - lo[i] + 1;
        if (kept_sums.count(lo, hi) != cells) audit.fail("inner box leaves the kept union");
    }
    if (!target_zone.contains_box(cov.base(), 1e-9)) audit.fail("covering leaves the target zone");

    // risk criterion on every kept cell's samples
    ZoneOptions opts;
    opts.criterion = zone.criterion;
    opts.perturbation = zone.perturbation;
    opts.penalty_c1 = zone.penalty_c1;
    opts.penalty_c2 = zone.penalty_c2;
    const auto w_samples = box_samples(spec.disturbance_box);
    auto criterion = [&](const Vec& x, const Vec& u) {
        double c = econ(x, u);
        if (zone.criterion == CriterionKind::stage_cost) {
            c += zone_penalty(x, target_zone, zone.penalty_c1, zone.penalty_c2);
        }
        return c;
    };

    // inflated one-step image of every kept cell under its certified input
    const Vec sx = zone.state_scale;
    const double r_cell = sx.cwiseProduct(cov.cell_half_widths()).norm();
    const double theta_eff =
        zone.disturbance_scale.cwiseProduct(zone.theta).lpNorm<Eigen::Infinity>();
    const double rho = zone.lipschitz.L_x * r_cell +
                       one_step_deviation_bound(zone.lipschitz, theta_eff, model.n_x);
    const Vec w0 = Vec::Zero(model.n_w);
    const MaskSums kept_sums(cov, zone.kept_mask);

    for (std::size_t idx = 0; idx < cov.size(); ++idx) {
        if (!zone.kept_mask[idx]) continue;
        const auto pts = box_samples(cov.cell(idx));

        bool crit_ok = true;
        for (const Vec& x : pts) {
            bool some_u = false;
            for (const Vec& u : zone.input_grid) {
                bool all_w = true;
                for (const Vec& w : w_samples) {
                    if (criterion(perturbed_state(model, x, u, w, zone.perturbation), u) >
                        zone.risk_factor) {
                        all_w = false;
                        break;
                    }
                }
                if (all_w) {
                    some_u = true;
                    break;
                }
            }
            if (!some_u) {
                crit_ok = false;
                break;
            }
        }
        if (!crit_ok) audit.fail("kept cell " + std::to_string(idx) + " violates the risk criterion");

        const std::int32_t j = zone.certified_input[idx];
        if (j < 0) {
            audit.fail("kept cell " + std::to_string(idx) + " has no certified input");
            continue;
        }
        Vec img_lo, img_hi;
        for (const Vec& p : pts) {
            Vec y = step(model, p, zone.input_grid[static_cast<std::size_t>(j)], w0);
            if (img_lo.size() == 0) {
                img_lo = y;
                img_hi = y;
            } else {
                img_lo = img_lo.cwiseMin(y);
                img_hi = img_hi.cwiseMax(y);
            }
        }
        IntervalBox inflated(img_lo, img_hi);
        for (int i = 0; i < cov.dim(); ++i) {
            inflated.lo[i] -= rho / sx[i];
            inflated.hi[i] += rho / sx[i];
        }
        if (!cov.base().contains_box(inflated)) {
            audit.fail("certified image of cell " + std::to_string(idx) + " leaves the covering");
            continue;
        }
        std::vector<int> rlo, rhi;
        cov.cell_range(inflated, rlo, rhi);
        std::int64_t cells = 1;
        for (std::size_t i = 0; i < rlo.size(); ++i) cells *= rhi[i] - rlo[i] + 1;
        if (kept_sums.count(rlo, rhi) != cells) {
            audit.fail("certified image of cell " + std::to_string(idx) + " leaves the kept union");
        }
    }
    return audit;
}

// ---------------------------------------------------------------------------
// Artifact format: line oriented text, one `key value...` pair per line,
// kept-cell indices one per line between `cells <count>` and `end`.
// ---------------------------------------------------------------------------

namespace {

void write_vec(std::ostream& os, const char* key, const Vec& v) {
    os << key;
    for (int i = 0; i < v.size(); ++i) os << ' ' << format_g17(v[i]);
    os << '\n';
}

void write_box(std::ostream& os, const char* key, const IntervalBox& b) {
    os << key;
    for (int i = 0; i < b.dim(); ++i) os << ' ' << format_g17(b.lo[i]) << ' ' << format_g17(b.hi[i]);
    os << '\n';
}

}  // namespace

void save_zone(const EconomicZone& zone, const IntervalBox& target_zone, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open zone artifact for writing: " + path);
    const auto& cov = zone.covering;
    os << "zempc-zone 1\n";
    os << "dim " << cov.dim() << '\n';
    write_box(os, "target_box", target_zone);
    os << "resolution";
    for (int r : cov.resolution()) os << ' ' << r;
    os << '\n';
    os << "risk_factor " << format_g17(zone.risk_factor) << '\n';
    os << "criterion " << (zone.criterion == CriterionKind::stage_cost ? "stage_cost" : "economic") << '\n';
    os << "perturbation " << (zone.perturbation == PerturbationKind::rate ? "rate" : "step") << '\n';
    os << "penalty_weights " << format_g17(zone.penalty_c1) << ' ' << format_g17(zone.penalty_c2) << '\n';
    os << "input_grid " << zone.input_grid.size();
    for (const Vec& u : zone.input_grid) {
        for (int i = 0; i < u.size(); ++i) os << ' ' << format_g17(u[i]);
    }
    os << '\n';
    write_vec(os, "theta", zone.theta);
    write_vec(os, "state_scale", zone.state_scale);
    write_vec(os, "disturbance_scale", zone.disturbance_scale);
    os << "lipschitz " << format_g17(zone.lipschitz.L_x) << ' ' << format_g17(zone.lipschitz.L_w)
       << ' ' << format_g17(zone.lipschitz.margin) << ' ' << zone.lipschitz.sample_count << '\n';
    write_box(os, "inner_box", zone.inner_box);
    if (zone.steady) {
        os << "steady_state";
        for (int i = 0; i < zone.steady->x_s.size(); ++i) os << ' ' << format_g17(zone.steady->x_s[i]);
        for (int i = 0; i < zone.steady->u_s.size(); ++i) os << ' ' << format_g17(zone.steady->u_s[i]);
        os << ' ' << format_g17(zone.steady->cost) << ' ' << format_g17(zone.steady->residual)
           << ' ' << (zone.steady->on_boundary ? 1 : 0) << '\n';
    }
    std::size_t kept = zone.kept_count();
    os << "cells " << kept << '\n';
    for (std::size_t i = 0; i < cov.size(); ++i) {
        if (zone.kept_mask[i]) {
            os << i;
            if (zone.certified_input[i] >= 0) os << ' ' << zone.certified_input[i];
            os << '\n';
        }
    }
    os << "candidates " << zone.candidate_count() << '\n';
    for (std::size_t i = 0; i < cov.size(); ++i) {
        if (zone.candidate_mask[i]) os << i << '\n';
    }
    os << "end\n";
    if (!os) throw Error("failed writing zone artifact: " + path);
}

LoadedZone load_zone(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open zone artifact: " + path);
    LoadedZone out;
    EconomicZone& zone = out.zone;

    std::string line;
    if (!std::getline(is, line) || line.rfind("zempc-zone", 0) != 0) {
        throw Error("not a zone artifact: " + path);
    }
    int dim = 0;
    std::vector<int> resolution;
    IntervalBox target;
    int n_u = -1;

    auto need = [&](std::istringstream& ss, const char* what) {
        if (ss.fail()) throw Error(std::string("zone artifact: malformed ") + what);
    };

    while (std::getline(is, line)) {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "dim") {
            ss >> dim;
            need(ss, "dim");
        } else if (key == "target_box") {
            Vec lo(dim), hi(dim);
            for (int i = 0; i < dim; ++i) ss >> lo[i] >> hi[i];
            need(ss, "target_box");
            target = {lo, hi};
        } else if (key == "resolution") {
            resolution.assign(static_cast<std::size_t>(dim), 0);
            for (int i = 0; i < dim; ++i) ss >> resolution[static_cast<std::size_t>(i)];
            need(ss, "resolution");
        } else if (key == "risk_factor") {
            ss >> zone.risk_factor;
        } else if (key == "criterion") {
            std::string v;
            ss >> v;
            zone.criterion = v == "economic" ? CriterionKind::economic_only : CriterionKind::stage_cost;
        } else if (key == "perturbation") {
            std::string v;
            ss >> v;
            zone.perturbation = v == "step" ? PerturbationKind::step : PerturbationKind::rate;
        } else if (key == "penalty_weights") {
            ss >> zone.penalty_c1 >> zone.penalty_c2;
        } else if (key == "input_grid") {
            std::size_t n = 0;
            ss >> n;
            std::vector<double> vals;
            double v;
            while (ss >> v) vals.push_back(v);
            if (n > 0 && vals.size() % n == 0) {
                n_u = static_cast<int>(vals.size() / n);
                for (std::size_t k = 0; k < n; ++k) {
                    Vec u(n_u);
                    for (int i = 0; i < n_u; ++i) u[i] = vals[k * static_cast<std::size_t>(n_u) + static_cast<std::size_t>(i)];
                    zone.input_grid.push_back(u);
                }
            }
        } else if (key == "theta") {
            std::vector<double> vals;
            double v;
            while (ss >> v) vals.push_back(v);
            zone.theta = Eigen::Map<Vec>(vals.data(), static_cast<long>(vals.size()));
        } else if (key == "state_scale") {
            std::vector<double> vals;
            double v;
            while (ss >> v) vals.push_back(v);
            zone.state_scale = Eigen::Map<Vec>(vals.data(), static_cast<long>(vals.size()));
        } else if (key == "disturbance_scale") {
            std::vector<double> vals;
            double v;
            while (ss >> v) vals.push_back(v);
            zone.disturbance_scale = Eigen::Map<Vec>(vals.data(), static_cast<long>(vals.size()));
        } else if (key == "lipschitz") {
            ss >> zone.lipschitz.L_x >> zone.lipschitz.L_w >> zone.lipschitz.margin >> zone.lipschitz.sample_count;
        } else if (key == "inner_box") {
            Vec lo(dim), hi(dim);
            for (int i = 0; i < dim; ++i) ss >> lo[i] >> hi[i];
            need(ss, "inner_box");
            zone.inner_box = {lo, hi};
        } else if (key == "steady_state") {
            std::vector<double> vals;
            double v;
            while (ss >> v) vals.push_back(v);
            if (n_u < 0 || vals.size() != static_cast<std::size_t>(dim + n_u) + 3) {
                throw Error("zone artifact: malformed steady_state line");
            }
            SteadyState s;
            s.x_s = Vec(dim);
            for (int i = 0; i < dim; ++i) s.x_s[i] = vals[static_cast<std::size_t>(i)];
            s.u_s = Vec(n_u);
            for (int i = 0; i < n_u; ++i) s.u_s[i] = vals[static_cast<std::size_t>(dim + i)];
            s.cost = vals[static_cast<std::size_t>(dim + n_u)];
            s.residual = vals[static_cast<std::size_t>(dim + n_u) + 1];
            s.on_boundary = vals[static_cast<std::size_t>(dim + n_u) + 2] != 0.0;
            zone.steady = s;
        } else if (key == "cells") {
            std::size_t count = 0;
            ss >> count;
            zone.covering = build_covering(target, resolution);
            zone.kept_mask.assign(zone.covering.size(), char(0));
            zone.candidate_mask.assign(zone.covering.size(), char(0));
            zone.certified_input.assign(zone.covering.size(), -1);
            for (std::size_t k = 0; k < count; ++k) {
                if (!std::getline(is, line)) throw Error("zone artifact: truncated cell list");
                std::istringstream cs(line);
                std::size_t idx;
                cs >> idx;
                if (cs.fail() || idx >= zone.covering.size()) {
                    throw Error("zone artifact: bad cell index");
                }
                zone.kept_mask[idx] = 1;
                std::int32_t cert;
                if (cs >> cert) zone.certified_input[idx] = cert;
            }
        } else if (key == "candidates") {
            std::size_t count = 0;
            ss >> count;
            for (std::size_t k = 0; k < count; ++k) {
                if (!std::getline(is, line)) throw Error("zone artifact: truncated candidate list");
                std::size_t idx = std::stoul(line);
                if (idx >= zone.covering.size()) throw Error("zone artifact: bad candidate index");
                zone.candidate_mask[idx] = 1;
            }
        } else if (key == "end" || key.empty()) {
            break;
        }
    }
    if (zone.covering.size() == 0) throw Error("zone artifact: missing cells section");
    out.target_zone = target;
    return out;
}

void write_zone_csv(const EconomicZone& zone, const std::vector<std::string>& state_names,
                    const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open zone csv for writing: " + path);
    for (int i = 0; i < zone.covering.dim(); ++i) {
        os << (i < static_cast<int>(state_names.size()) ? state_names[static_cast<std::size_t>(i)]
                                                        : "x" + std::to_string(i))
           << ',';
    }
    os << "in_criterion,in_kernel\n";
    for (std::size_t idx = 0; idx < zone.covering.size(); ++idx) {
        Vec c = zone.covering.cell_center(idx);
        for (int i = 0; i < c.size(); ++i) os << format_g17(c[i]) << ',';
        os << int(zone.candidate_mask[idx]) << ',' << int(zone.kept_mask[idx]) << '\n';
    }
}

}  // namespace zempc
