/**
 * @file qp.hpp
 * @brief Dense strictly-convex quadratic programming by the dual active-set
 *        method of Goldfarb and Idnani.
 */

#ifndef GMSTEER_QP_HPP
#define GMSTEER_QP_HPP

#include "gmsteer/types.hpp"

namespace gmsteer {

enum class QpStatus { optimal, infeasible, failed };

struct QpResult {
    QpStatus status = QpStatus::failed;
    VecX x;             // primal solution
    VecX eq_multipliers;   // one per equality row
    VecX ineq_multipliers; // one per inequality row, >= 0, zero when inactive
    int iterations = 0;
};

/// Minimizes 1/2 x^T H x + g^T x subject to
///   A_eq x + b_eq = 0   and   A_in x + b_in <= 0.
/// H must be positive definite. At the optimum,
///   H x + g + A_eq^T eq_multipliers + A_in^T ineq_multipliers = 0.
QpResult solve_qp(const MatX& h, const VecX& g, const MatX& a_eq, const VecX& b_eq,
                  const MatX& a_in, const VecX& b_in);

}  // namespace gmsteer

#endif
