#include "zempc/steady.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace zempc {

namespace {

struct FixedPoint {
    Vec x;
    double residual;
};

Vec scale_for(const IntervalBox& zone_box, const Vec& given) {
    if (given.size() > 0) return given;
    Vec s(zone_box.dim());
    for (int i = 0; i < zone_box.dim(); ++i) {
        double w = zone_box.width(i);
        s[i] = w > 0.0 ? 1.0 / w : 1.0;
    }
    return s;
}

double scaled_norm(const Vec& v, const Vec& s) { return s.cwiseProduct(v).norm(); }

/// Damped Newton on g(x) = step(x,u,0) - x with finite-difference Jacobian,
/// Picard fallback when Newton stalls.
std::optional<FixedPoint> solve_fixed_point(const PlantModel& model, const Vec& u, Vec x,
                                            const IntervalBox& state_hint, const Vec& scale,
                                            const SteadyStateOptions& opts) {
    const int n = model.n_x;
    const Vec w0 = Vec::Zero(model.n_w);
    auto residual = [&](const Vec& p) -> std::optional<Vec> {
        try {
            return step(model, p, u, w0) - p;
        } catch (const ModelEvalError&) {
            return std::nullopt;
        }
    };

    auto g_opt = residual(x);
    if (!g_opt) return std::nullopt;
    Vec g = *g_opt;

    for (int iter = 0; iter < opts.newton_max_iter; ++iter) {
        double gn = scaled_norm(g, scale);
        if (gn <= opts.fixed_point_tol) break;

        Mat J(n, n);
        bool fd_ok = true;
        for (int i = 0; i < n && fd_ok; ++i) {
            double hstep = 1e-6 * std::max(1.0, std::abs(x[i]));
            Vec xp = x;
            xp[i] += hstep;
            auto gp = residual(xp);
            if (!gp) {
                fd_ok = false;
                break;
            }
            J.col(i) = (*gp - g) / hstep;
        }
        if (!fd_ok) return std::nullopt;

        Vec dx = J.fullPivLu().solve(-g);
        if (!dx.allFinite()) return std::nullopt;

        // damping: insist on a residual decrease, else shrink
        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls) {
            Vec xt = x + alpha * dx;
            auto gt = residual(xt);
            if (gt && scaled_norm(*gt, scale) < gn) {
                x = xt;
                g = *gt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // Picard sweep from the current point
            Vec xp = x;
            for (int p = 0; p < 500; ++p) {
                auto fx = residual(xp);
                if (!fx) return std::nullopt;
                if (scaled_norm(*fx, scale) <= opts.fixed_point_tol) {
                    x = xp;
                    g = *fx;
                    break;
                }
                xp = xp + *fx;  // x <- step(x)
                if (!state_hint.contains(xp, 10.0 * state_hint.widths().maxCoeff())) return std::nullopt;
            }
            auto fx = residual(xp);
            if (!fx || scaled_norm(*fx, scale) > opts.fixed_point_tol) return std::nullopt;
            x = xp;
            g = *fx;
            break;
        }
    }
    double gn = scaled_norm(g, scale);
    if (gn > opts.fixed_point_tol) return std::nullopt;
    return FixedPoint{x, gn};
}

struct Candidate {
    Vec x, u;
    double cost;
    double residual;
};

/// Best in-zone fixed point for the given input, scanning a few starts.
std::optional<Candidate> best_for_input(const PlantModel& model, const Vec& u,
                                        const IntervalBox& zone_box, const EconCost& econ,
                                        const Vec& scale, const SteadyStateOptions& opts) {
    std::vector<Vec> starts;
    starts.push_back(zone_box.center());
    for (unsigned m = 0; m < zone_box.num_vertices(); ++m) {
        starts.push_back(0.5 * (zone_box.vertex(m) + zone_box.center()));
    }
    std::optional<Candidate> best;
    for (const Vec& x0 : starts) {
        auto fp = solve_fixed_point(model, u, x0, zone_box, scale, opts);
        if (!fp) continue;
        if (!zone_box.contains(fp->x, 1e-9)) continue;
        double c = econ(fp->x, u);
        if (!best || c < best->cost) best = Candidate{fp->x, u, c, fp->residual};
    }
    return best;
}

}  // namespace

SteadyState solve_steady_state(const PlantModel& model, const IntervalBox& zone_box,
                               const IntervalBox& input_box, const EconCost& econ,
                               const SteadyStateOptions& opts) {
    if (!zone_box.valid()) throw ConfigError("steady.zone_box", "zone box must be nonempty");
    if (!input_box.valid()) throw ConfigError("steady.input_box", "input box must be nonempty");
    if (input_box.dim() != 1 && model.n_u != input_box.dim()) {
        throw ConfigError("steady.input_box", "input box dimension does not match the model");
    }

    const Vec scale = scale_for(zone_box, opts.state_scale);

    // coarse scan over the input box (per-axis grid; n_u is small)
    std::vector<Vec> grid;
    {
        const int pts = std::max(2, opts.input_grid);
        std::size_t total = 1;
        for (int i = 0; i < input_box.dim(); ++i) total *= static_cast<std::size_t>(pts);
        std::vector<int> mi(static_cast<std::size_t>(input_box.dim()), 0);
        for (std::size_t n = 0; n < total; ++n) {
            Vec u(input_box.dim());
            for (int i = 0; i < input_box.dim(); ++i) {
                u[i] = input_box.lo[i] + input_box.width(i) * mi[static_cast<std::size_t>(i)] / (pts - 1);
            }
            grid.push_back(u);
            for (int i = input_box.dim() - 1; i >= 0; --i) {
                if (++mi[static_cast<std::size_t>(i)] < pts) break;
                mi[static_cast<std::size_t>(i)] = 0;
            }
        }
    }

    std::optional<Candidate> best;
    for (const Vec& u : grid) {
        auto cand = best_for_input(model, u, zone_box, econ, scale, opts);
        if (!cand) continue;
        constexpr double tie_tol = 1e-12;
        if (!best || cand->cost < best->cost - tie_tol ||
            (std::abs(cand->cost - best->cost) <= tie_tol && cand->u.sum() < best->u.sum())) {
            best = cand;
        }
    }
    if (!best) {
        throw InfeasibleError(
            "no steady pair found inside the zone: the zone is too small or the dynamics exit it");
    }

    // polish: coordinate descent on u with halving radius per axis
    Vec radius = input_box.widths() / std::max(2, opts.input_grid);
    for (int round = 0; round < opts.polish_rounds; ++round) {
        bool improved = false;
        for (int axis = 0; axis < input_box.dim(); ++axis) {
            for (double dir : {-1.0, 1.0}) {
                Vec u = best->u;
                u[axis] += dir * radius[axis];
                if (u[axis] < input_box.lo[axis] || u[axis] > input_box.hi[axis]) continue;
                auto cand = best_for_input(model, u, zone_box, econ, scale, opts);
                if (cand && cand->cost < best->cost) {
                    best = cand;
                    improved = true;
                }
            }
        }
        if (!improved) radius *= 0.5;
        if (radius.maxCoeff() < 1e-12 * input_box.widths().maxCoeff()) break;
    }

    SteadyState out;
    out.x_s = best->x;
    out.u_s = best->u;
    out.cost = best->cost;
    out.residual = best->residual;
    for (int i = 0; i < zone_box.dim(); ++i) {
        double edge = 1e-6 * std::max(zone_box.width(i), 1e-12);
        if (best->x[i] - zone_box.lo[i] < edge || zone_box.hi[i] - best->x[i] < edge) {
            out.on_boundary = true;  // callers may anchor the terminal in a smaller zone
        }
    }
    return out;
}

}  // namespace zempc
