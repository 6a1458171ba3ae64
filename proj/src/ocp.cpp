#include "zempc/ocp.hpp"

#include "zempc/qp.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace zempc {

void EmpcConfig::validate() const {
    if (N < 1) throw ConfigError("controller.N", "horizon must be >= 1");
    if (c1 < 0.0 || c2 < 0.0) throw ConfigError("controller.c1", "penalty weights must be >= 0");
    if (!tracked_zone.valid()) throw ConfigError("controller.tracked_zone", "tracked zone is empty");
    if (!state_box.valid() || !input_box.valid()) {
        throw ConfigError("controller.bounds", "state/input boxes are empty");
    }
    if (!econ) throw ConfigError("controller.econ", "economic cost is not set");
    if (!state_box.contains(terminal.x_s, 1e-9)) {
        throw ConfigError("controller.terminal", "terminal state lies outside the state box");
    }
}

double TranscribedProblem::objective_at(const std::vector<Vec>& z, const std::vector<Vec>& v) const {
    double f = 0.0;
    for (int k = 0; k < config->N; ++k) {
        f += config->stage_cost(z[static_cast<std::size_t>(k)], v[static_cast<std::size_t>(k)]);
    }
    return f;
}

TranscribedProblem build_ocp(const Vec& x_now, const EmpcConfig& config, const PlantModel& model) {
    config.validate();
    TranscribedProblem p;
    p.model = &model;
    p.config = &config;
    p.x_now = x_now;
    return p;
}

namespace {

Vec ones_if_empty(const Vec& scale, int dim) {
    return scale.size() == static_cast<long>(dim) ? scale : Vec::Ones(dim);
}

// All solver-internal quantities live in scaled coordinates (raw / scale).
struct Workspace {
    const PlantModel* model;
    const EmpcConfig* cfg;
    bool soft_terminal;
    int N, nx, nu, nv;  // nv = N*nu condensed variables

    Vec sx, su;        // divisors
    Vec xs_s, us_s;    // scaled terminal pair
    Vec zlo, zhi, vlo, vhi;  // scaled bounds

    std::vector<Vec> zs;  // z(0..N) scaled
    std::vector<Vec> vs;  // v(0..N-1) scaled

    [[nodiscard]] Vec unscale_x(const Vec& z) const { return z.cwiseProduct(sx); }
    [[nodiscard]] Vec unscale_u(const Vec& v) const { return v.cwiseProduct(su); }

    [[nodiscard]] Vec step_s(const Vec& z, const Vec& v) const {
        Vec w = Vec::Zero(model->n_w);
        return step(*model, unscale_x(z), unscale_u(v), w).cwiseQuotient(sx);
    }
    [[nodiscard]] double cost_s(const Vec& z, const Vec& v) const {
        return cfg->stage_cost(unscale_x(z), unscale_u(v));
    }

    [[nodiscard]] double objective() const {
        double f = 0.0;
        for (int k = 0; k < N; ++k) {
            f += cost_s(zs[static_cast<std::size_t>(k)], vs[static_cast<std::size_t>(k)]);
        }
        if (soft_terminal) {
            f += cfg->soft_terminal_weight * (zs[static_cast<std::size_t>(N)] - xs_s).squaredNorm();
        }
        return f;
    }

    /// Shooting residuals c(0..N-1) and, unless soft, terminal residual c(N).
    void residuals(std::vector<Vec>& c) const {
        c.resize(static_cast<std::size_t>(N) + (soft_terminal ? 0 : 1));
        for (int k = 0; k < N; ++k) {
            c[static_cast<std::size_t>(k)] =
                zs[static_cast<std::size_t>(k) + 1] -
                step_s(zs[static_cast<std::size_t>(k)], vs[static_cast<std::size_t>(k)]);
        }
        if (!soft_terminal) c[static_cast<std::size_t>(N)] = zs[static_cast<std::size_t>(N)] - xs_s;
    }

    [[nodiscard]] static double linf(const std::vector<Vec>& c) {
        double m = 0.0;
        for (const Vec& ci : c) m = std::max(m, ci.cwiseAbs().maxCoeff());
        return m;
    }
    [[nodiscard]] static double l1(const std::vector<Vec>& c) {
        double m = 0.0;
        for (const Vec& ci : c) m += ci.cwiseAbs().sum();
        return m;
    }
};

struct StageDerivatives {
    std::vector<Mat> A, B;       // scaled step Jacobians per stage
    std::vector<Vec> gz, gv;     // scaled cost gradients per stage
    std::vector<Mat> H;          // per-stage PSD cost Hessian over (z, v)
};

void differentiate(const Workspace& w, StageDerivatives& d) {
    const int nx = w.nx, nu = w.nu, N = w.N;
    const double fd = w.cfg->fd_step;
    d.A.assign(static_cast<std::size_t>(N), Mat(nx, nx));
    d.B.assign(static_cast<std::size_t>(N), Mat(nx, nu));
    d.gz.assign(static_cast<std::size_t>(N) + 1, Vec::Zero(nx));
    d.gv.assign(static_cast<std::size_t>(N), Vec::Zero(nu));
    d.H.assign(static_cast<std::size_t>(N), Mat::Zero(nx + nu, nx + nu));

    for (int k = 0; k < N; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        const Vec& z = w.zs[ks];
        const Vec& v = w.vs[ks];
        const Vec base = w.step_s(z, v);
        for (int i = 0; i < nx; ++i) {
            Vec zp = z;
            zp[i] += fd;
            d.A[ks].col(i) = (w.step_s(zp, v) - base) / fd;
        }
        for (int i = 0; i < nu; ++i) {
            Vec vp = v;
            vp[i] += fd;
            d.B[ks].col(i) = (w.step_s(z, vp) - base) / fd;
        }

        const double f0 = w.cost_s(z, v);
        auto cost_at = [&](int i, double h1, int j, double h2) {
            Vec zp = z, vp = v;
            auto bump = [&](int idx, double hh) {
                if (idx < nx) zp[idx] += hh; else vp[idx - nx] += hh;
            };
            bump(i, h1);
            if (j >= 0) bump(j, h2);
            return w.cost_s(zp, vp);
        };
        Vec g(nx + nu);
        for (int i = 0; i < nx + nu; ++i) g[i] = (cost_at(i, fd, -1, 0.0) - f0) / fd;
        d.gz[ks] = g.head(nx);
        d.gv[ks] = g.tail(nu);

        // second differences on a coarser step, then projected to PSD
        const double h2 = 1e-4;
        Mat& H = d.H[ks];
        std::vector<double> fi(static_cast<std::size_t>(nx + nu));
        for (int i = 0; i < nx + nu; ++i) fi[static_cast<std::size_t>(i)] = cost_at(i, h2, -1, 0.0);
        for (int i = 0; i < nx + nu; ++i) {
            for (int j = i; j < nx + nu; ++j) {
                double fij = cost_at(i, h2, j, h2);
                double v2 = (fij - fi[static_cast<std::size_t>(i)] - fi[static_cast<std::size_t>(j)] + f0) / (h2 * h2);
                H(i, j) = v2;
                H(j, i) = v2;
            }
        }
        Eigen::SelfAdjointEigenSolver<Mat> es(H);
        Vec ev = es.eigenvalues().cwiseMax(0.0);
        H = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    }
    if (w.soft_terminal) {
        d.gz[static_cast<std::size_t>(N)] =
            2.0 * w.cfg->soft_terminal_weight * (w.zs[static_cast<std::size_t>(N)] - w.xs_s);
    }
}

}  // namespace

OcpSolution solve_ocp(const TranscribedProblem& problem, const OcpSolution* warm) {
    const PlantModel& model = *problem.model;
    const EmpcConfig& cfg = *problem.config;
    const int N = cfg.N, nx = model.n_x, nu = model.n_u;
    const int nv = N * nu;

    Workspace w;
    w.model = &model;
    w.cfg = &cfg;
    w.soft_terminal = problem.soft_terminal;
    w.N = N;
    w.nx = nx;
    w.nu = nu;
    w.nv = nv;
    w.sx = ones_if_empty(cfg.state_scale, nx);
    w.su = ones_if_empty(cfg.input_scale, nu);
    w.xs_s = cfg.terminal.x_s.cwiseQuotient(w.sx);
    w.us_s = cfg.terminal.u_s.cwiseQuotient(w.su);
    w.zlo = cfg.state_box.lo.cwiseQuotient(w.sx);
    w.zhi = cfg.state_box.hi.cwiseQuotient(w.sx);
    w.vlo = cfg.input_box.lo.cwiseQuotient(w.su);
    w.vhi = cfg.input_box.hi.cwiseQuotient(w.su);

    // initial iterate: warm arrays as given, else the constant rollout
    w.zs.assign(static_cast<std::size_t>(N) + 1, problem.x_now.cwiseQuotient(w.sx));
    w.vs.assign(static_cast<std::size_t>(N), w.us_s);
    if (warm && static_cast<int>(warm->z.size()) == N + 1 && static_cast<int>(warm->v.size()) == N) {
        for (int k = 1; k <= N; ++k) {
            w.zs[static_cast<std::size_t>(k)] = warm->z[static_cast<std::size_t>(k)].cwiseQuotient(w.sx);
        }
        for (int k = 0; k < N; ++k) {
            w.vs[static_cast<std::size_t>(k)] = warm->v[static_cast<std::size_t>(k)].cwiseQuotient(w.su);
        }
    }
    for (int k = 1; k <= N; ++k) {
        w.zs[static_cast<std::size_t>(k)] = w.zs[static_cast<std::size_t>(k)].cwiseMax(w.zlo).cwiseMin(w.zhi);
    }
    for (int k = 0; k < N; ++k) {
        w.vs[static_cast<std::size_t>(k)] = w.vs[static_cast<std::size_t>(k)].cwiseMax(w.vlo).cwiseMin(w.vhi);
    }

    OcpSolution sol;
    sol.soft_terminal = problem.soft_terminal;
    sol.status = SolveStatus::max_iter;

    StageDerivatives der;
    std::vector<Vec> c;
    double merit_nu = 1.0;
    double mu = cfg.levenberg;
    int stalls = 0;

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        sol.iterations = iter + 1;
        w.residuals(c);
        const double feas = Workspace::linf(c);
        const double f0 = w.objective();

        differentiate(w, der);

        // condense: dz_k = M_k dv + d_k along the linearized dynamics
        std::vector<Mat> M(static_cast<std::size_t>(N) + 1, Mat::Zero(nx, nv));
        std::vector<Vec> dvec(static_cast<std::size_t>(N) + 1, Vec::Zero(nx));
        for (int k = 0; k < N; ++k) {
            const auto ks = static_cast<std::size_t>(k);
            M[ks + 1] = der.A[ks] * M[ks];
            M[ks + 1].middleCols(k * nu, nu) += der.B[ks];
            dvec[ks + 1] = der.A[ks] * dvec[ks] - c[ks];
        }

        // reduced quadratic model
        Mat Hred = Mat::Zero(nv, nv);
        Vec gred = Vec::Zero(nv);
        for (int k = 0; k < N; ++k) {
            const auto ks = static_cast<std::size_t>(k);
            Mat Mbar(nx + nu, nv);
            Mbar.topRows(nx) = M[ks];
            Mbar.bottomRows(nu).setZero();
            Mbar.block(nx, k * nu, nu, nu).setIdentity();
            Vec dbar = Vec::Zero(nx + nu);
            dbar.head(nx) = dvec[ks];
            Vec gbar(nx + nu);
            gbar << der.gz[ks], der.gv[ks];
            Hred.noalias() += Mbar.transpose() * der.H[ks] * Mbar;
            gred.noalias() += Mbar.transpose() * (der.H[ks] * dbar + gbar);
        }
        if (w.soft_terminal) {
            const auto Ns = static_cast<std::size_t>(N);
            const double wt = cfg.soft_terminal_weight;
            Hred.noalias() += 2.0 * wt * M[Ns].transpose() * M[Ns];
            gred.noalias() += M[Ns].transpose() *
                              (2.0 * wt * dvec[Ns] + der.gz[Ns]);
        }
        Hred.diagonal().array() += mu;

        QpProblem qp;
        qp.G = Hred;
        qp.g0 = gred;
        if (!w.soft_terminal) {
            qp.CE = M[static_cast<std::size_t>(N)];
            qp.be = -(c[static_cast<std::size_t>(N)] + dvec[static_cast<std::size_t>(N)]);
        } else {
            qp.CE = Mat(0, nv);
            qp.be = Vec(0);
        }
        const int n_zrows = N * nx;
        qp.CI = Mat(2 * nv + 2 * n_zrows, nv);
        qp.bi = Vec(2 * nv + 2 * n_zrows);
        for (int k = 0; k < N; ++k) {
            for (int i = 0; i < nu; ++i) {
                int row = 2 * (k * nu + i);
                qp.CI.row(row).setZero();
                qp.CI(row, k * nu + i) = 1.0;
                qp.bi[row] = w.vlo[i] - w.vs[static_cast<std::size_t>(k)][i];
                qp.CI.row(row + 1).setZero();
                qp.CI(row + 1, k * nu + i) = -1.0;
                qp.bi[row + 1] = w.vs[static_cast<std::size_t>(k)][i] - w.vhi[i];
            }
        }
        for (int k = 1; k <= N; ++k) {
            const auto ks = static_cast<std::size_t>(k);
            for (int i = 0; i < nx; ++i) {
                int row = 2 * nv + 2 * ((k - 1) * nx + i);
                qp.CI.row(row) = M[ks].row(i);
                qp.bi[row] = w.zlo[i] - w.zs[ks][i] - dvec[ks][i];
                qp.CI.row(row + 1) = -M[ks].row(i);
                qp.bi[row + 1] = w.zs[ks][i] + dvec[ks][i] - w.zhi[i];
            }
        }

        QpSolution qs = solve_qp(qp);
        if (qs.status == QpStatus::infeasible) {
            sol.status = SolveStatus::infeasible;
            break;
        }

        // projected-gradient stationarity at the current iterate with the QP duals
        Vec stat = gred;
        if (qp.CE.rows() > 0) stat -= qp.CE.transpose() * qs.lambda_eq;
        stat -= qp.CI.transpose() * qs.mu_in;
        const double kkt = stat.cwiseAbs().maxCoeff();
        sol.kkt_residual = kkt;
        sol.constraint_residual = feas;
        if (feas <= cfg.constraint_tol && kkt <= cfg.stationarity_tol) {
            sol.status = SolveStatus::optimal;
            break;
        }

        // l1 exact-penalty line search along (dv, dz)
        const Vec& dv = qs.x;
        std::vector<Vec> dz(static_cast<std::size_t>(N) + 1);
        for (int k = 0; k <= N; ++k) {
            const auto ks = static_cast<std::size_t>(k);
            dz[ks] = M[ks] * dv + dvec[ks];
        }
        double grad_dir = 0.0;
        for (int k = 0; k < N; ++k) {
            const auto ks = static_cast<std::size_t>(k);
            grad_dir += der.gz[ks].dot(dz[ks]) + der.gv[ks].dot(dv.segment(k * nu, nu));
        }
        if (w.soft_terminal) {
            grad_dir += der.gz[static_cast<std::size_t>(N)].dot(dz[static_cast<std::size_t>(N)]);
        }
        double dual_max = qs.lambda_eq.size() > 0 ? qs.lambda_eq.cwiseAbs().maxCoeff() : 0.0;
        // costate recursion bounds the shooting multipliers for the penalty weight
        {
            Vec costate = w.soft_terminal ? Vec(der.gz[static_cast<std::size_t>(N)])
                                          : Vec(qs.lambda_eq);
            for (int k = N - 1; k >= 1; --k) {
                const auto ks = static_cast<std::size_t>(k);
                costate = der.gz[ks] + der.A[ks].transpose() * costate;
                dual_max = std::max(dual_max, costate.cwiseAbs().maxCoeff());
            }
        }
        if (merit_nu < 1.1 * dual_max) merit_nu = 2.0 * dual_max;

        const double c_l1 = Workspace::l1(c);
        const double merit0 = f0 + merit_nu * c_l1;
        const double ddir = grad_dir - merit_nu * c_l1;

        auto saved_z = w.zs;
        auto saved_v = w.vs;
        double alpha = 1.0;
        bool accepted = false;
        std::vector<Vec> ctrial;
        for (int ls = 0; ls < 40; ++ls) {
            for (int k = 0; k <= N; ++k) {
                const auto ks = static_cast<std::size_t>(k);
                if (k >= 1) {
                    w.zs[ks] = (saved_z[ks] + alpha * dz[ks]).cwiseMax(w.zlo).cwiseMin(w.zhi);
                }
            }
            for (int k = 0; k < N; ++k) {
                const auto ks = static_cast<std::size_t>(k);
                w.vs[ks] = (saved_v[ks] + alpha * dv.segment(k * nu, nu)).cwiseMax(w.vlo).cwiseMin(w.vhi);
            }
            double merit;
            try {
                w.residuals(ctrial);
                merit = w.objective() + merit_nu * Workspace::l1(ctrial);
            } catch (const ModelEvalError&) {
                alpha *= 0.5;
                continue;
            }
            if (merit <= merit0 + 0.1 * alpha * std::min(ddir, 0.0) + 1e-14 * std::abs(merit0)) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            w.zs = saved_z;
            w.vs = saved_v;
            mu = std::min(mu * 10.0, 1e-2);
            if (++stalls >= 4) break;
            continue;
        }
        if (alpha >= 1.0 - 1e-12) {
            mu = std::max(mu * 0.5, cfg.levenberg);
        } else if (alpha < 0.1) {
            mu = std::min(mu * 4.0, 1e-2);
        }
        stalls = 0;
    }

    // final residuals at the returned iterate
    w.residuals(c);
    sol.constraint_residual = Workspace::linf(c);
    sol.z.resize(static_cast<std::size_t>(N) + 1);
    sol.v.resize(static_cast<std::size_t>(N));
    for (int k = 0; k <= N; ++k) {
        sol.z[static_cast<std::size_t>(k)] = w.unscale_x(w.zs[static_cast<std::size_t>(k)]);
    }
    for (int k = 0; k < N; ++k) {
        sol.v[static_cast<std::size_t>(k)] = w.unscale_u(w.vs[static_cast<std::size_t>(k)]);
    }
    if (sol.status == SolveStatus::max_iter &&
        sol.constraint_residual <= cfg.constraint_tol &&
        sol.kkt_residual <= cfg.stationarity_tol) {
        sol.status = SolveStatus::optimal;
    }
    return sol;
}

double rotated_cost(const Vec& z, const Vec& v, const std::function<double(const Vec&)>& lambda,
                    const PlantModel& model, const SteadyState& terminal, const EconCost& econ) {
    double r = econ(z, v) - econ(terminal.x_s, terminal.u_s);
    if (lambda) {
        Vec w0 = Vec::Zero(model.n_w);
        r += lambda(z) - lambda(step(model, z, v, w0));
    }
    return r;
}

ZoneEmpc::ZoneEmpc(PlantModel model, EmpcConfig config)
    : model_(std::move(model)), config_(std::move(config)) {
    config_.validate();
}

std::pair<Vec, StepDiagnostics> ZoneEmpc::control_step(const Vec& x_now) {
    TranscribedProblem problem = build_ocp(x_now, config_, model_);

    // shift the previous solution one step and append the terminal pair
    std::optional<OcpSolution> guess;
    if (prev_) {
        OcpSolution g;
        const int N = config_.N;
        g.z.resize(static_cast<std::size_t>(N) + 1);
        g.v.resize(static_cast<std::size_t>(N));
        g.z[0] = x_now;
        for (int k = 1; k <= N - 1; ++k) {
            g.z[static_cast<std::size_t>(k)] = prev_->z[static_cast<std::size_t>(k) + 1];
        }
        g.z[static_cast<std::size_t>(N - 1 >= 0 ? N : N)] = config_.terminal.x_s;
        g.z[static_cast<std::size_t>(N)] = config_.terminal.x_s;
        for (int k = 0; k < N - 1; ++k) {
            g.v[static_cast<std::size_t>(k)] = prev_->v[static_cast<std::size_t>(k) + 1];
        }
        g.v[static_cast<std::size_t>(N - 1)] = config_.terminal.u_s;
        guess = std::move(g);
    }

    OcpSolution sol = solve_ocp(problem, guess ? &*guess : nullptr);
    bool escalated = false;
    if (sol.status == SolveStatus::infeasible) {
        problem.soft_terminal = true;
        sol = solve_ocp(problem, guess ? &*guess : nullptr);
        escalated = true;
        if (sol.status == SolveStatus::infeasible) {
            throw InfeasibleError("horizon problem infeasible even with the soft terminal");
        }
    }

    StepDiagnostics diag;
    diag.status = sol.status;
    diag.iterations = sol.iterations;
    diag.objective = sol.objective;
    diag.kkt_residual = sol.kkt_residual;
    diag.constraint_residual = sol.constraint_residual;
    diag.soft_terminal = escalated;

    Vec u = sol.v[0];
    prev_ = std::move(sol);
    return {u, diag};
}

}  // namespace zempc
