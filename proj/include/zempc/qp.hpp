#pragma once

#include "zempc/types.hpp"

namespace zempc {

// Strictly convex quadratic program
//   min 0.5 x'Gx + g0'x   s.t.  CE x = be,  CI x >= bi
// with G positive definite. Rows of CE/CI are the constraint normals.
struct QpProblem {
    Mat G;
    Vec g0;
    Mat CE;
    Vec be;
    Mat CI;
    Vec bi;
};

enum class QpStatus { optimal, infeasible, max_iter };

struct QpSolution {
    Vec x;
    Vec lambda_eq;  // equality multipliers (free sign)
    Vec mu_in;      // inequality multipliers (>= 0, zero when inactive)
    QpStatus status = QpStatus::optimal;
    int iterations = 0;
};

// Dual active-set method (Goldfarb-Idnani): start from the unconstrained
// minimizer, add the most violated constraint at a time, taking partial dual
// steps that drop blocking constraints. Factorizations are recomputed per
// active-set change; intended for small dense problems.
QpSolution solve_qp(const QpProblem& qp);

}  // namespace zempc
