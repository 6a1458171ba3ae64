#include "zempc/model.hpp"

#include "zempc/util.hpp"

#include <cmath>

namespace zempc {

namespace {

void check_finite(const Vec& v, const char* what, const Vec& x, const Vec& u, const Vec& w) {
    for (int i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            throw ModelEvalError(std::string(what) + " produced a non-finite component", x, u, w);
        }
    }
}

}  // namespace

Vec step(const PlantModel& model, const Vec& x, const Vec& u, const Vec& w) {
    if (model.transition) {
        Vec next = model.transition(x, u, w);
        check_finite(next, "discrete transition", x, u, w);
        return next;
    }
    const double h = model.h;
    Vec k1 = model.rhs(x, u, w);
    check_finite(k1, "rhs stage 1", x, u, w);
    Vec k2 = model.rhs(x + 0.5 * h * k1, u, w);
    check_finite(k2, "rhs stage 2", x, u, w);
    Vec k3 = model.rhs(x + 0.5 * h * k2, u, w);
    check_finite(k3, "rhs stage 3", x, u, w);
    Vec k4 = model.rhs(x + h * k3, u, w);
    check_finite(k4, "rhs stage 4", x, u, w);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vec rate_deviation(const PlantModel& model, const Vec& x, const Vec& u, const Vec& w) {
    Vec w0 = Vec::Zero(w.size());
    if (!model.rhs || model.transition) {
        return step(model, x, u, w) - step(model, x, u, w0);
    }
    Vec dw = model.rhs(x, u, w);
    Vec d0 = model.rhs(x, u, w0);
    check_finite(dw, "rhs", x, u, w);
    return dw - d0;
}

void ConstraintSpec::validate() const {
    if (!state_box.valid()) throw Error("state box is empty or unbounded");
    if (!input_box.valid()) throw Error("input box is empty or unbounded");
    if (!disturbance_box.valid()) throw Error("disturbance box is empty or unbounded");
    for (int i = 0; i < disturbance_box.dim(); ++i) {
        if (!(disturbance_box.lo[i] < 0.0 && disturbance_box.hi[i] > 0.0)) {
            throw Error("disturbance box must contain the zero deviation in its interior");
        }
    }
}

namespace {

Vec scaled(const Vec& v, const Vec& scale) {
    if (scale.size() == 0) return v;
    return scale.cwiseProduct(v);
}

Vec sample_in(const IntervalBox& box, const CounterRng& rng, std::uint64_t counter, std::uint64_t lane0) {
    Vec x(box.dim());
    for (int i = 0; i < box.dim(); ++i) {
        x[i] = rng.uniform(box.lo[i], box.hi[i], counter, lane0 + static_cast<std::uint64_t>(i));
    }
    return x;
}

}  // namespace

LipschitzEstimate estimate_lipschitz(const PlantModel& model, const ConstraintSpec& spec,
                                     const LipschitzOptions& opts) {
    if (opts.n_samples < 2) throw Error("lipschitz estimation needs at least 2 samples");
    spec.validate();

    const CounterRng rng(opts.seed);
    const Vec w0 = Vec::Zero(model.n_w);
    const Vec diam = spec.state_box.widths();

    const std::size_t n = static_cast<std::size_t>(opts.n_samples);
    std::vector<double> rx(n, 0.0), rw(n, 0.0);

    parallel_for(n, [&](std::size_t s) {
        const auto c = static_cast<std::uint64_t>(s);
        Vec x = sample_in(spec.state_box, rng, c, 0);
        Vec u = sample_in(spec.input_box, rng, c, 8);

        // Pair point at a log-uniform distance so both local slopes and
        // box-scale secants are represented.
        double scale_exp = rng.uniform(-4.0, 0.0, c, 16);
        double radius = std::pow(10.0, scale_exp);
        Vec z(model.n_x);
        for (int i = 0; i < model.n_x; ++i) {
            double dir = 2.0 * rng.uniform01(c, 24 + static_cast<std::uint64_t>(i)) - 1.0;
            z[i] = x[i] + radius * dir * diam[i];
        }
        z = spec.state_box.clamp(z);

        Vec fx = step(model, x, u, w0);
        Vec fz = step(model, z, u, w0);
        double dxz = scaled(x - z, opts.state_scale).norm();
        if (dxz > 0.0) rx[s] = scaled(fx - fz, opts.state_scale).norm() / dxz;

        Vec w = sample_in(spec.disturbance_box, rng, c, 32);
        double shrink = std::pow(10.0, rng.uniform(-3.0, 0.0, c, 40));
        w *= shrink;
        double dw = scaled(w, opts.disturbance_scale).norm();
        if (dw > 0.0) {
            Vec fw = step(model, x, u, w);
            rw[s] = scaled(fw - fx, opts.disturbance_scale).norm() / dw;
        }
    });

    double max_rx = 0.0, max_rw = 0.0;
    long used = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (rx[s] > 0.0 || rw[s] > 0.0) ++used;
        max_rx = std::max(max_rx, rx[s]);
        max_rw = std::max(max_rw, rw[s]);
    }
    if (used == 0) throw Error("degenerate sampling: no usable state/disturbance pairs");

    LipschitzEstimate est;
    est.L_x = opts.margin * max_rx;
    est.L_w = opts.margin * max_rw;
    est.sample_count = opts.n_samples;
    est.margin = opts.margin;
    return est;
}

double one_step_deviation_bound(const LipschitzEstimate& est, double theta, int n_x) {
    return std::sqrt(static_cast<double>(n_x)) * est.L_w * theta;
}

Vec cstr_rhs(const Vec& x, const Vec& u, const Vec& w_dev, const CstrParams& p) {
    const double C_A = x[0];
    const double T = x[1];
    const double T_c = u[0];
    const double C_Af = p.C_Af + (w_dev.size() > 0 ? w_dev[0] : 0.0);
    const double T_f = p.T_f + (w_dev.size() > 1 ? w_dev[1] : 0.0);

    const double rate = p.k0 * std::exp(-p.E_over_R / T) * C_A;
    const double q_over_V = p.q / p.V;

    Vec dx(2);
    dx[0] = q_over_V * (C_Af - C_A) - rate;
    dx[1] = q_over_V * (T_f - T) + (p.dH_neg / (p.rho * p.c_p)) * rate
            + (p.UA / (p.V * p.rho * p.c_p)) * (T_c - T);
    if (!std::isfinite(dx[0]) || !std::isfinite(dx[1])) {
        throw ModelEvalError("cstr rhs produced a non-finite rate", x, u, w_dev);
    }
    return dx;
}

PlantModel make_cstr_model(const CstrParams& params, double h) {
    PlantModel m;
    m.n_x = 2;
    m.n_u = 1;
    m.n_w = 2;
    m.h = h;
    m.rhs = [params](const Vec& x, const Vec& u, const Vec& w) { return cstr_rhs(x, u, w, params); };
    m.state_names = {"C_A", "T"};
    m.input_names = {"T_c"};
    m.disturbance_names = {"dC_Af", "dT_f"};
    return m;
}

ConstraintSpec cstr_constraints() {
    ConstraintSpec spec;
    spec.state_box = IntervalBox::from_flat({0.0, 1.0, 345.0, 355.0});
    spec.input_box = IntervalBox::from_flat({285.0, 315.0});
    spec.disturbance_box = IntervalBox::from_flat({-0.1, 0.1, -2.0, 2.0});
    return spec;
}

IntervalBox cstr_target_zone() {
    return IntervalBox::from_flat({0.0, 1.0, 348.0, 352.0});
}

}  // namespace zempc
