/**
 * @file sqp.hpp
 * @brief Sequential quadratic programming over the steering NLP: damped-BFGS
 *        Lagrangian Hessian, L1-penalty line search, dual active-set QP
 *        subproblems with an elastic fallback, plus an augmented-Lagrangian
 *        alternative behind a config switch.
 */

#ifndef GMSTEER_SQP_HPP
#define GMSTEER_SQP_HPP

#include <iosfwd>
#include <string>

#include "gmsteer/nlp.hpp"
#include "gmsteer/scenario.hpp"

namespace gmsteer {

enum class SolveStatus { converged, iteration_limit, infeasible };

const char* to_string(SolveStatus status);

struct SolveReport {
    SolveStatus status = SolveStatus::iteration_limit;
    int iterations = 0;
    double final_cost = 0.0;
    double max_equality_violation = 0.0;    // absolute terminal mean residual (DU/VU)
    double max_inequality_violation = 0.0;  // positive part of the scaled rows
    double stationarity = 0.0;
    double wall_time_seconds = 0.0;
    long segment_propagations = 0;
};

struct SolveResult {
    ControlPolicy policy;
    MomentTrajectory trajectory;  // fresh forward pass at the returned policy
    SolveReport report;
};

/// Solves the NLP from the given guess. When progress_log is non-null, one
/// machine-parsable line per major iteration is written:
///   iteration cost max_violation step_length
SolveResult solve(NlpProblem& problem, const ControlPolicy& guess, const SolverConfig& config,
                  std::ostream* progress_log = nullptr);

}  // namespace gmsteer

#endif
