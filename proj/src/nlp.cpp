#include "gmsteer/nlp.hpp"

#include <cmath>

#include "gmsteer/parallel.hpp"

namespace gmsteer {

NlpProblem::NlpProblem(SteeringProblem problem, int threads)
    : problem_(std::move(problem)), threads_(std::max(1, threads)) {
    nodes_ = problem_.schedule.segments();
    if (nodes_ < 1) throw DomainError("NlpProblem: schedule has no segments");
    problem_.chance.validate();

    Eigen::SelfAdjointEigenSolver<Mat6> es(problem_.terminal.p_f);
    if (es.eigenvalues().minCoeff() <= 0.0) {
        throw DomainError("NlpProblem: terminal covariance must be positive definite");
    }
    pf_whitener_ = es.eigenvectors() *
                   es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                   es.eigenvectors().transpose();
}

VecX NlpProblem::pack(const ControlPolicy& policy) const {
    if (policy.size() != nodes_) throw DomainError("NlpProblem::pack: policy length mismatch");
    VecX z(dimension());
    for (int k = 0; k < nodes_; ++k) z.segment<3>(3 * k) = policy.v[k];
    for (int k = 0; k < nodes_; ++k) {
        for (int r = 0; r < 3; ++r) {
            z.segment<6>(3 * nodes_ + 18 * k + 6 * r) = policy.gains[k].row(r).transpose();
        }
    }
    return z;
}

ControlPolicy NlpProblem::unpack(const VecX& z) const {
    if (z.size() != dimension()) throw DomainError("NlpProblem::unpack: dimension mismatch");
    ControlPolicy p = ControlPolicy::zero(nodes_);
    for (int k = 0; k < nodes_; ++k) p.v[k] = z.segment<3>(3 * k);
    for (int k = 0; k < nodes_; ++k) {
        for (int r = 0; r < 3; ++r) {
            p.gains[k].row(r) = z.segment<6>(3 * nodes_ + 18 * k + 6 * r).transpose();
        }
    }
    return p;
}

VecX NlpProblem::assemble_inequalities(const ControlPolicy& policy, const MomentTrajectory& traj,
                                       int from_node) const {
    VecX c = VecX::Zero(num_in());
    const double inv_rho = 1.0 / problem_.chance.rho_u;
    for (int k = from_node; k < nodes_; ++k) {
        c(k) = chance_constraint_value(policy.v[k], traj.puu[k], problem_.chance) * inv_rho;
    }
    Mat6 diff = pf_whitener_ * (problem_.terminal.p_f - traj.terminal_cov) * pf_whitener_;
    symmetrize(diff);
    Eigen::SelfAdjointEigenSolver<Mat6> es(diff, Eigen::EigenvaluesOnly);
    c.segment<6>(nodes_) = -es.eigenvalues();  // ascending eigenvalues, feasible when >= 0
    return c;
}

NlpEval NlpProblem::evaluate(const VecX& z) const {
    NlpEval out;
    ControlPolicy policy = unpack(z);
    out.trajectory = forward_pass(problem_, policy);
    segment_count_.fetch_add(nodes_, std::memory_order_relaxed);

    out.cost = cost(policy);
    out.cost_grad = VecX::Zero(dimension());
    out.cost_grad.head(3 * nodes_) = 2.0 * z.head(3 * nodes_);

    out.c_eq = out.trajectory.terminal_mean - problem_.terminal.x_f;
    out.c_in = assemble_inequalities(policy, out.trajectory, 0);
    return out;
}

void NlpProblem::jacobian(const VecX& z, const NlpEval& base, MatX& j_eq, MatX& j_in,
                          double fd_step) const {
    const int n = dimension();
    j_eq.resize(num_eq(), n);
    j_in.resize(num_in(), n);
    j_eq.setZero();
    j_in.setZero();

    parallel_for(n, threads_, [&](int col) {
        const int k = (col < 3 * nodes_) ? col / 3 : (col - 3 * nodes_) / 18;
        const double h0 = fd_step * std::max(1.0, std::abs(z(col)));

        Gaussian start(base.trajectory.mean_minus[k], base.trajectory.cov_minus[k]);
        MomentTrajectory traj;
        traj.mean_minus = base.trajectory.mean_minus;
        traj.cov_minus = base.trajectory.cov_minus;
        traj.mean_plus = base.trajectory.mean_plus;
        traj.cov_plus = base.trajectory.cov_plus;
        traj.puu = base.trajectory.puu;

        auto run_partial = [&](double h) {
            VecX zp = z;
            zp(col) += h;
            ControlPolicy policy = unpack(zp);
            forward_pass_from(problem_, policy, k, start, traj);
            segment_count_.fetch_add(nodes_ - k, std::memory_order_relaxed);
            VecX c_eq = traj.terminal_mean - problem_.terminal.x_f;
            VecX c_in = assemble_inequalities(policy, traj, k);
            return std::make_pair(c_eq, c_in);
        };

        double h = h0;
        std::pair<VecX, VecX> perturbed;
        try {
            perturbed = run_partial(h);
        } catch (const IntegrationError&) {
            h = -h0;  // reversed difference when the forward point is unreachable
            perturbed = run_partial(h);
        }
        j_eq.col(col) = (perturbed.first - base.c_eq) / h;
        // Rows below node k are unaffected by construction and stay zero.
        for (int row = k; row < num_in(); ++row) {
            j_in(row, col) = (perturbed.second(row) - base.c_in(row)) / h;
        }
    });
}

TerminalResiduals NlpProblem::raw_terminal_residuals(const MomentTrajectory& traj) const {
    return terminal_constraint_residuals(traj.terminal_mean, traj.terminal_cov, problem_.terminal);
}

ControlPolicy hohmann_initial_guess(const SteeringProblem& problem) {
    const int nodes = problem.schedule.segments();
    const double total = hohmann_total_dv(problem);
    const Vec3 v0 = problem.initial.mean.tail<3>();
    const double v0n = v0.norm();
    if (!(v0n > 0.0)) throw DomainError("hohmann_initial_guess: initial velocity is zero");

    ControlPolicy policy = ControlPolicy::zero(nodes);
    const Vec3 per_node = (total / nodes) * (v0 / v0n);
    for (int k = 0; k < nodes; ++k) policy.v[k] = per_node;
    return policy;
}

double hohmann_total_dv(const SteeringProblem& problem) {
    const double mu = problem.dynamics.mu;
    const double r1 = problem.initial.mean.head<3>().norm();
    const double r2 = problem.terminal.x_f.head<3>().norm();
    if (!(r1 > 1e-12) || !(r2 > 1e-12)) {
        throw DomainError("hohmann_total_dv: degenerate orbital radii");
    }
    const double dv1 = std::sqrt(mu / r1) * (std::sqrt(2.0 * r2 / (r1 + r2)) - 1.0);
    const double dv2 = std::sqrt(mu / r2) * (1.0 - std::sqrt(2.0 * r1 / (r1 + r2)));
    return std::abs(dv1) + std::abs(dv2);
}

}  // namespace gmsteer
