#include "gmsteer/steering.hpp"

#include <cmath>

namespace gmsteer {

void ControlPolicy::validate() const {
    if (v.size() != gains.size() || v.size() != ref_means.size()) {
        throw DomainError("ControlPolicy: v/gains/ref_means lengths differ");
    }
    if (v.empty()) throw DomainError("ControlPolicy: empty policy");
}

void ChanceConstraintParams::validate() const {
    if (!(beta > 0.0) || beta > 1.0) throw DomainError("ChanceConstraintParams: beta must be in (0,1]");
    if (!(gamma >= 1.0)) throw DomainError("ChanceConstraintParams: gamma must be >= 1");
    if (!(rho_u > 0.0)) throw DomainError("ChanceConstraintParams: rho_u must be positive");
    if (control_dim <= 0) throw DomainError("ChanceConstraintParams: control_dim must be positive");
}

void NodeSchedule::validate() const {
    if (node_count < 2) throw DomainError("NodeSchedule: need at least 2 nodes");
    if (!(tN > t0)) throw DomainError("NodeSchedule: tN must exceed t0");
}

std::vector<double> NodeSchedule::times() const {
    validate();
    std::vector<double> t(node_count);
    const double dt = (tN - t0) / segments();
    for (int k = 0; k < node_count; ++k) t[k] = t0 + dt * k;
    t.back() = tN;
    return t;
}

std::pair<Vec6, Mat6> node_update(const Vec6& mean, const Mat6& cov, const Vec3& v,
                                  const Mat36& gain, const Mat63& f_u, const Mat3& exec_cov) {
    const Vec6 mean_plus = mean + f_u * v;
    const Mat6 a = Mat6::Identity() + f_u * gain;
    Mat6 cov_plus = a * cov * a.transpose() + f_u * exec_cov * f_u.transpose();
    symmetrize(cov_plus);
    return {mean_plus, cov_plus};
}

Mat3 control_covariance(const Mat36& gain, const Mat6& cov_minus, const Mat3& exec_cov) {
    Mat3 puu = gain * cov_minus * gain.transpose() + exec_cov;
    symmetrize(puu);
    return puu;
}

double chance_multiplier(double beta, int control_dim) {
    if (!(beta > 0.0) || beta > 1.0) throw DomainError("chance_multiplier: beta must be in (0,1]");
    return std::sqrt(2.0 * std::log(1.0 / beta)) + std::sqrt(static_cast<double>(control_dim));
}

double chance_constraint_value(const Vec3& v, const Mat3& puu,
                               const ChanceConstraintParams& params) {
    params.validate();
    Eigen::SelfAdjointEigenSolver<Mat3> es(puu, Eigen::EigenvaluesOnly);
    const double lmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
    return v.norm() + params.gamma * std::sqrt(lmax) * chance_multiplier(params.beta, params.control_dim) -
           params.rho_u;
}

TerminalResiduals terminal_constraint_residuals(const Vec6& mean_n, const Mat6& cov_n,
                                                const TerminalSpec& spec) {
    TerminalResiduals out;
    out.mean_residual = mean_n - spec.x_f;
    Mat6 diff = spec.p_f - cov_n;
    symmetrize(diff);
    Eigen::SelfAdjointEigenSolver<Mat6> es(diff, Eigen::EigenvaluesOnly);
    out.eig_residuals = es.eigenvalues();  // ascending
    return out;
}

namespace {

void run_recursion(const SteeringProblem& problem, const ControlPolicy& policy,
                   std::vector<Vec6>* ref_means_out, int start_node, const Gaussian& start_state,
                   MomentTrajectory& out) {
    const int nseg = problem.schedule.segments();
    if (policy.size() != nseg) {
        throw DomainError("forward_pass: policy has " + std::to_string(policy.size()) +
                          " controls, schedule needs " + std::to_string(nseg));
    }
    const auto times = problem.schedule.times();

    if (out.nodes() != nseg) {
        out.mean_minus.assign(nseg, Vec6::Zero());
        out.cov_minus.assign(nseg, Mat6::Zero());
        out.mean_plus.assign(nseg, Vec6::Zero());
        out.cov_plus.assign(nseg, Mat6::Zero());
        out.puu.assign(nseg, Mat3::Zero());
    }
    out.node_times = times;

    Gaussian g = start_state;
    for (int k = start_node; k < nseg; ++k) {
        out.mean_minus[k] = g.mean;
        out.cov_minus[k] = g.cov;
        out.puu[k] = control_covariance(policy.gains[k], g.cov, problem.exec_error.cov);
        if (ref_means_out) (*ref_means_out)[k] = g.mean;

        auto [mean_plus, cov_plus] = node_update(g.mean, g.cov, policy.v[k], policy.gains[k],
                                                 problem.schedule.f_u, problem.exec_error.cov);
        out.mean_plus[k] = mean_plus;
        out.cov_plus[k] = cov_plus;

        GaussianMixture mix = split_gaussian({mean_plus, cov_plus}, problem.split_dims,
                                             problem.library);
        try {
            mix = propagate_mixture(mix, times[k], times[k + 1], problem.dynamics, problem.ode,
                                    problem.propagate_threads);
        } catch (const IntegrationError& e) {
            throw IntegrationError("forward_pass: segment after node " + std::to_string(k) + ": " +
                                   e.what());
        }
        g = collapse(mix);
    }
    out.terminal_mean = g.mean;
    out.terminal_cov = g.cov;
}

}  // namespace

MomentTrajectory forward_pass(const SteeringProblem& problem, ControlPolicy& policy) {
    problem.initial.validate("forward_pass initial state");
    MomentTrajectory out;
    run_recursion(problem, policy, &policy.ref_means, 0, problem.initial, out);
    return out;
}

void forward_pass_from(const SteeringProblem& problem, const ControlPolicy& policy,
                       int start_node, const Gaussian& state_minus, MomentTrajectory& out) {
    run_recursion(problem, policy, nullptr, start_node, state_minus, out);
}

double cost(const ControlPolicy& policy) {
    double j = 0.0;
    for (const auto& v : policy.v) j += v.squaredNorm();
    return j;
}

std::vector<Vec3> cost_gradient(const ControlPolicy& policy) {
    std::vector<Vec3> g(policy.v.size());
    for (size_t k = 0; k < policy.v.size(); ++k) g[k] = 2.0 * policy.v[k];
    return g;
}

double cost_magnitude_sum(const ControlPolicy& policy) {
    double j = 0.0;
    for (const auto& v : policy.v) j += v.norm();
    return j;
}

}  // namespace gmsteer
