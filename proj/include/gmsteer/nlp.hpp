/**
 * @file nlp.hpp
 * @brief Nonlinear program over the control policy: decision-vector packing,
 *        scaled constraint evaluation through the forward pass, and the
 *        causality-exploiting finite-difference constraint Jacobian.
 */

#ifndef GMSTEER_NLP_HPP
#define GMSTEER_NLP_HPP

#include <atomic>

#include "gmsteer/steering.hpp"
#include "gmsteer/types.hpp"

namespace gmsteer {

/// One full evaluation of the NLP at a decision point.
struct NlpEval {
    double cost = 0.0;
    VecX cost_grad;   // analytic: 2 v over the v block, zero over gains
    VecX c_eq;        // terminal mean residual, 6 entries (DU/VU)
    VecX c_in;        // scaled chance rows then whitened eigenvalue rows, <= 0 feasible
    MomentTrajectory trajectory;
};

/// Decision vector layout: all v stacked (3 per node), then all gains stacked
/// row-major (18 per node). Constraints are scaled so residuals are O(1):
/// chance rows divided by rho_u, and the terminal covariance constraint
/// expressed through the congruence-whitened difference
///   -eig( W (P_f - P_N) W^T ),  W = P_f^{-1/2},
/// which has the same sign pattern as the raw eigenvalue residuals.
class NlpProblem {
public:
    NlpProblem(SteeringProblem problem, int threads = 1);

    int nodes() const { return nodes_; }
    int dimension() const { return 21 * nodes_; }
    int num_eq() const { return 6; }
    int num_in() const { return nodes_ + 6; }

    const SteeringProblem& problem() const { return problem_; }

    VecX pack(const ControlPolicy& policy) const;
    ControlPolicy unpack(const VecX& z) const;

    /// Forward pass plus cost/constraint assembly.
    NlpEval evaluate(const VecX& z) const;

    /// Forward-difference Jacobian with step fd_step * max(1, |z_i|).
    /// Perturbing node k's variables only affects nodes >= k, so each column
    /// restarts from the cached unperturbed pre-node state at node k instead
    /// of t0. Columns are evaluated concurrently. A column whose perturbed
    /// pass fails is retried with a reversed difference.
    void jacobian(const VecX& z, const NlpEval& base, MatX& j_eq, MatX& j_in,
                  double fd_step = 1e-6) const;

    /// Segment propagations performed so far (evaluate + jacobian calls).
    long segment_propagations() const { return segment_count_.load(); }
    void reset_instrumentation() { segment_count_.store(0); }

    /// Raw (unscaled) terminal residuals for reporting.
    TerminalResiduals raw_terminal_residuals(const MomentTrajectory& traj) const;

private:
    VecX assemble_inequalities(const ControlPolicy& policy, const MomentTrajectory& traj,
                               int from_node) const;

    SteeringProblem problem_;
    int nodes_ = 0;
    int threads_ = 1;
    Mat6 pf_whitener_ = Mat6::Identity();  // P_f^{-1/2}
    mutable std::atomic<long> segment_count_{0};
};

/// Coplanar-circular Hohmann seed: the total transfer delta-v from vis-viva
/// between radii |r0| and |r_f| is distributed equally across the control
/// nodes, each impulse directed along the initial mean velocity; gains zero.
ControlPolicy hohmann_initial_guess(const SteeringProblem& problem);

/// Total Hohmann delta-v (VU) used by the seed, exposed for reporting.
double hohmann_total_dv(const SteeringProblem& problem);

}  // namespace gmsteer

#endif
