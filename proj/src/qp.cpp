#include "zempc/qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace zempc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Active {
    int idx;       // row into the combined constraint list
    bool equality;
    double sign;   // equalities may enter with a flipped normal
};

}  // namespace

QpSolution solve_qp(const QpProblem& qp) {
    const int n = static_cast<int>(qp.G.rows());
    const int me = static_cast<int>(qp.CE.rows());
    const int mi = static_cast<int>(qp.CI.rows());

    QpSolution sol;
    sol.lambda_eq = Vec::Zero(me);
    sol.mu_in = Vec::Zero(mi);

    Eigen::LLT<Mat> llt(qp.G);
    if (llt.info() != Eigen::Success) throw Error("qp: Hessian is not positive definite");

    Vec x = llt.solve(-qp.g0);

    std::vector<Active> active;
    std::vector<double> u;  // multipliers parallel to `active`
    Mat N(n, 0);            // active normals as columns

    auto normal_of = [&](int row, double sign) -> Vec {
        return row < me ? Vec(sign * qp.CE.row(row).transpose())
                        : Vec(qp.CI.row(row - me).transpose());
    };
    auto offset_of = [&](int row, double sign) -> double {
        return row < me ? sign * qp.be[row] : qp.bi[row - me];
    };

    const double feas_tol = 1e-10 * (1.0 + qp.g0.cwiseAbs().maxCoeff());
    const int max_iter = 50 * (n + me + mi + 1);
    int iter = 0;

    auto add_constraint = [&](int row) -> bool {
        double sign = 1.0;
        Vec a = normal_of(row, sign);
        double b = offset_of(row, sign);
        double s = a.dot(x) - b;
        const bool is_eq = row < me;
        if (is_eq && s > 0.0) {  // flip so the violation is from below
            sign = -1.0;
            a = -a;
            b = -b;
            s = -s;
        }
        if (!is_eq && s >= -feas_tol) return true;  // already satisfied

        double up = 0.0;
        while (true) {
            if (++iter > max_iter) {
                sol.status = QpStatus::max_iter;
                return false;
            }
            const int q = static_cast<int>(active.size());
            Vec Ginv_a = llt.solve(a);
            Vec r;
            Vec z;
            if (q > 0) {
                Mat GinvN = llt.solve(N);
                Mat M = N.transpose() * GinvN;  // q x q
                r = M.ldlt().solve(N.transpose() * Ginv_a);
                z = Ginv_a - GinvN * r;
            } else {
                z = Ginv_a;
            }

            const double z_norm = z.cwiseAbs().maxCoeff();
            const double za = z.dot(a);

            // dual step bound from active inequalities whose multiplier would cross zero
            double t1 = kInf;
            int drop = -1;
            for (int k = 0; k < q; ++k) {
                if (active[static_cast<std::size_t>(k)].equality) continue;
                if (q > 0 && r[k] > 1e-14) {
                    double cand = u[static_cast<std::size_t>(k)] / r[k];
                    if (cand < t1) {
                        t1 = cand;
                        drop = k;
                    }
                }
            }
            // primal step to feasibility of the incoming constraint
            double t2 = kInf;
            if (z_norm > 1e-13 * (1.0 + a.cwiseAbs().maxCoeff()) && za > 0.0) t2 = -s / za;

            double t = std::min(t1, t2);
            if (t == kInf) {
                if (std::abs(s) <= feas_tol) return true;  // dependent & satisfied: skip
                sol.status = QpStatus::infeasible;
                return false;
            }

            // dual update
            for (int k = 0; k < q; ++k) u[static_cast<std::size_t>(k)] -= t * r[k];
            up += t;

            if (t2 < kInf) {
                x += t * z;
                s = a.dot(x) - b;
            }
            if (t == t2) {  // incoming constraint now active
                active.push_back({row, is_eq, sign});
                u.push_back(up);
                N.conservativeResize(Eigen::NoChange, q + 1);
                N.col(q) = a;
                return true;
            }
            // partial step: drop the blocking constraint and retry
            active.erase(active.begin() + drop);
            u.erase(u.begin() + drop);
            Mat N2(n, q - 1);
            int c = 0;
            for (int k = 0; k < q; ++k) {
                if (k == drop) continue;
                N2.col(c++) = N.col(k);
            }
            N = std::move(N2);
        }
    };

    for (int e = 0; e < me; ++e) {
        if (!add_constraint(e)) {
            sol.x = x;
            sol.iterations = iter;
            return sol;
        }
    }

    while (true) {
        if (++iter > max_iter) {
            sol.status = QpStatus::max_iter;
            break;
        }
        // most violated inequality
        int worst = -1;
        double worst_s = -feas_tol;
        for (int i = 0; i < mi; ++i) {
            double s = qp.CI.row(i).dot(x) - qp.bi[i];
            if (s < worst_s) {
                worst_s = s;
                worst = i;
            }
        }
        if (worst < 0) break;  // primal feasible: done
        if (!add_constraint(me + worst)) break;
    }

    sol.x = x;
    sol.iterations = iter;
    for (std::size_t k = 0; k < active.size(); ++k) {
        const Active& a = active[k];
        if (a.equality) {
            sol.lambda_eq[a.idx] = a.sign * u[k];
        } else {
            sol.mu_in[a.idx - me] = u[k];
        }
    }
    return sol;
}

}  // namespace zempc
