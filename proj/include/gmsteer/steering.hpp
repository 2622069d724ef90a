/**
 * @file steering.hpp
 * @brief Forward recursion of the moment pipeline (split, propagate, collapse,
 *        node update), the affine feedback law quantities, and the cost and
 *        constraint evaluations that feed the optimizer.
 */

#ifndef GMSTEER_STEERING_HPP
#define GMSTEER_STEERING_HPP

#include <utility>
#include <vector>

#include "gmsteer/dynamics.hpp"
#include "gmsteer/gm_ops.hpp"
#include "gmsteer/split_library.hpp"
#include "gmsteer/types.hpp"

namespace gmsteer {

/// Affine Markov feedback policy: u_k = v_k + G_k (x - m_ref_k) + du_k.
/// ref_means are filled in by the forward pass.
struct ControlPolicy {
    std::vector<Vec3> v;       // open-loop controls, VU
    std::vector<Mat36> gains;  // feedback gains, VU per state unit
    std::vector<Vec6> ref_means;

    int size() const { return static_cast<int>(v.size()); }

    static ControlPolicy zero(int nodes) {
        ControlPolicy p;
        p.v.assign(nodes, Vec3::Zero());
        p.gains.assign(nodes, Mat36::Zero());
        p.ref_means.assign(nodes, Vec6::Zero());
        return p;
    }

    void validate() const;
};

/// Zero-mean Gaussian execution error applied to every commanded control.
struct ExecutionErrorModel {
    Mat3 cov = Mat3::Zero();  // P_dudu, VU^2
};

struct ChanceConstraintParams {
    double rho_u = 0.0;  // max control norm, VU
    double beta = 0.05;  // violation probability, (0,1]
    double gamma = 1.0;  // scaling, >= 1
    int control_dim = 3;

    void validate() const;
};

struct TerminalSpec {
    Vec6 x_f = Vec6::Zero();
    Mat6 p_f = Mat6::Zero();
};

/// Node epochs are uniformly spaced over [t0, tN]; controls act at nodes
/// 0..N-2 (before each segment) and the final node has no control.
struct NodeSchedule {
    double t0 = 0.0;
    double tN = 0.0;
    int node_count = 0;     // >= 2
    Mat63 f_u = Mat63::Zero();

    int segments() const { return node_count - 1; }
    std::vector<double> times() const;

    void validate() const;
};

/// Moments recorded by the forward pass at every node, plus terminal moments.
struct MomentTrajectory {
    std::vector<double> node_times;  // size segments()+1
    std::vector<Vec6> mean_minus;    // pre-node, size segments()
    std::vector<Mat6> cov_minus;
    std::vector<Vec6> mean_plus;     // post-node
    std::vector<Mat6> cov_plus;
    std::vector<Mat3> puu;           // control covariance per node
    Vec6 terminal_mean = Vec6::Zero();
    Mat6 terminal_cov = Mat6::Zero();

    int nodes() const { return static_cast<int>(mean_minus.size()); }
};

/// Everything the forward pass needs besides the policy.
struct SteeringProblem {
    Gaussian initial;  // state pdf at t0
    NodeSchedule schedule;
    DynamicsModel dynamics;
    ExecutionErrorModel exec_error;
    ChanceConstraintParams chance;
    TerminalSpec terminal;
    std::vector<int> split_dims;
    SplitLibrary library;
    Rk45Options ode;
    int propagate_threads = 1;
};

/// Node update: mean_plus = mean + F_u v, cov_plus = (I + F_u G) cov (I + F_u G)^T + P_dudu.
std::pair<Vec6, Mat6> node_update(const Vec6& mean, const Mat6& cov, const Vec3& v,
                                  const Mat36& gain, const Mat63& f_u, const Mat3& exec_cov);

/// P_uu = G P_xx G^T + P_dudu (state and execution error uncorrelated).
Mat3 control_covariance(const Mat36& gain, const Mat6& cov_minus, const Mat3& exec_cov);

/// sqrt(2 ln(1/beta)) + sqrt(m), the Gaussian concentration multiplier.
double chance_multiplier(double beta, int control_dim);

/// |v| + gamma sqrt(lmax(P_uu)) (sqrt(2 ln(1/beta)) + sqrt(m)) - rho_u.
/// Satisfied iff the value is <= 0.
double chance_constraint_value(const Vec3& v, const Mat3& puu, const ChanceConstraintParams& params);

struct TerminalResiduals {
    Vec6 mean_residual;   // m_N - x_f, zero when satisfied
    Vec6 eig_residuals;   // eigenvalues of (P_f - P_N) ascending, all >= 0 when satisfied
};

TerminalResiduals terminal_constraint_residuals(const Vec6& mean_n, const Mat6& cov_n,
                                                const TerminalSpec& spec);

/// Runs the full recursion from t0: for each node, record pre-node moments and
/// P_uu, overwrite the policy reference mean, apply the node update, split,
/// propagate the mixture over the segment, and collapse. The final segment
/// ends at the terminal node, which has no control.
MomentTrajectory forward_pass(const SteeringProblem& problem, ControlPolicy& policy);

/// Restarts the recursion at start_node from the given pre-node Gaussian
/// (used by finite differencing to avoid re-propagating unperturbed nodes).
/// Only entries for nodes >= start_node and the terminal moments are written.
void forward_pass_from(const SteeringProblem& problem, const ControlPolicy& policy,
                       int start_node, const Gaussian& state_minus, MomentTrajectory& out);

/// J = sum v_k^T v_k and its gradient 2 v_k (zero with respect to gains).
double cost(const ControlPolicy& policy);
std::vector<Vec3> cost_gradient(const ControlPolicy& policy);

/// Reporting-only alternative: sum |v_k|.
double cost_magnitude_sum(const ControlPolicy& policy);

}  // namespace gmsteer

#endif
