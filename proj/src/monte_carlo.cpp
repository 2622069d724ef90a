#include "gmsteer/monte_carlo.hpp"

#include <algorithm>
#include <cmath>

#include "gmsteer/gm_ops.hpp"
#include "gmsteer/parallel.hpp"

namespace gmsteer {

void McConfig::validate() const {
    if (n_samples < 1) throw DomainError("McConfig: n_samples must be >= 1");
    if (em_substeps < 1) throw DomainError("McConfig: em_substeps must be >= 1");
}

std::pair<std::vector<Vec6>, Eigen::Matrix<double, Eigen::Dynamic, 3>> simulate_sample(
    const Vec6& x0, const ControlPolicy& policy, const SteeringProblem& problem,
    const McConfig& config, Rng& rng) {
    const int nseg = problem.schedule.segments();
    if (policy.size() != nseg) throw DomainError("simulate_sample: policy length mismatch");
    const auto times = problem.schedule.times();

    const bool use_exec = config.execution_error &&
                          problem.exec_error.cov.cwiseAbs().maxCoeff() > 0.0;
    Mat3 exec_sqrt = Mat3::Zero();
    if (use_exec) exec_sqrt = covariance_sqrt(problem.exec_error.cov);

    const bool use_noise = config.process_noise && problem.dynamics.has_process_noise();
    MatX noise_gain;  // F_w sqrt(Q), applied with sqrt(dt) per substep
    if (use_noise) {
        const MatX q_sqrt = covariance_sqrt(problem.dynamics.psd);
        noise_gain = problem.dynamics.noise_map * q_sqrt;
    }

    std::vector<Vec6> nodes;
    nodes.reserve(nseg + 1);
    Eigen::Matrix<double, Eigen::Dynamic, 3> controls(nseg, 3);

    Vec6 x = x0;
    for (int k = 0; k < nseg; ++k) {
        nodes.push_back(x);
        Vec3 u = policy.v[k] + policy.gains[k] * (x - policy.ref_means[k]);
        if (use_exec) {
            Vec3 xi;
            for (int i = 0; i < 3; ++i) xi(i) = rng.normal();
            u += exec_sqrt * xi;
        }
        controls.row(k) = u.transpose();
        x += problem.schedule.f_u * u;

        if (use_noise) {
            const double dt = (times[k + 1] - times[k]) / config.em_substeps;
            const double sqrt_dt = std::sqrt(dt);
            const int p = static_cast<int>(noise_gain.cols());
            VecX xi(p);
            for (int s = 0; s < config.em_substeps; ++s) {
                const Vec6 drift = problem.dynamics.eval_field(x);
                for (int i = 0; i < p; ++i) xi(i) = rng.normal();
                x += drift * dt + sqrt_dt * (noise_gain * xi);
            }
        } else {
            x = propagate_state(x, times[k], times[k + 1], problem.dynamics, problem.ode);
        }
    }
    nodes.push_back(x);
    return {std::move(nodes), std::move(controls)};
}

McResult run_monte_carlo(const SteeringProblem& problem, const ControlPolicy& policy,
                         const McConfig& config) {
    config.validate();
    if (policy.ref_means.size() != static_cast<size_t>(policy.size())) {
        throw DomainError("run_monte_carlo: policy reference means not populated");
    }

    const MatX p0_sqrt = covariance_sqrt(problem.initial.cov);
    const Vec6 m0 = problem.initial.mean;

    McResult out;
    out.terminal_states.resize(config.n_samples, 6);
    out.controls.resize(config.n_samples);
    out.failed.assign(config.n_samples, 0);

    parallel_for(config.n_samples, config.threads, [&](int i) {
        Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(i));
        Vec6 xi;
        for (int d = 0; d < 6; ++d) xi(d) = rng.normal();
        const Vec6 x0 = m0 + p0_sqrt * xi;
        try {
            auto [nodes, controls] = simulate_sample(x0, policy, problem, config, rng);
            out.terminal_states.row(i) = nodes.back().transpose();
            out.controls[i] = std::move(controls);
        } catch (const IntegrationError&) {
            out.failed[i] = 1;
            out.terminal_states.row(i).setZero();
            out.controls[i].setZero(problem.schedule.segments(), 3);
        }
    });
    for (auto f : out.failed) out.failed_count += f;
    return out;
}

namespace {

MahalanobisStats::Summary summarize(VecX d2) {
    MahalanobisStats::Summary s;
    if (d2.size() == 0) return s;
    std::sort(d2.data(), d2.data() + d2.size());
    auto quantile = [&](double p) {
        const double pos = p * (d2.size() - 1);
        const int lo = static_cast<int>(pos);
        const int hi = std::min<int>(lo + 1, d2.size() - 1);
        const double w = pos - lo;
        return (1.0 - w) * d2(lo) + w * d2(hi);
    };
    s.min = d2(0);
    s.q1 = quantile(0.25);
    s.median = quantile(0.5);
    s.q3 = quantile(0.75);
    s.max = d2(d2.size() - 1);
    int within = 0;
    for (int i = 0; i < d2.size(); ++i) within += d2(i) <= kGate3dChi2999;
    s.within_gate_percent = 100.0 * within / d2.size();
    return s;
}

}  // namespace

std::array<double, 6> gate_percentages(const McResult& result, const TerminalSpec& spec) {
    std::array<double, 6> pct{};
    const int n = result.samples();
    int used = 0;
    std::array<int, 6> hits{};
    for (int i = 0; i < n; ++i) {
        if (result.failed[i]) continue;
        ++used;
        for (int d = 0; d < 6; ++d) {
            const double gate = kGate1dZ999 * std::sqrt(spec.p_f(d, d));
            if (std::abs(result.terminal_states(i, d) - spec.x_f(d)) <= gate) ++hits[d];
        }
    }
    if (used == 0) throw DomainError("gate_percentages: no unflagged samples");
    for (int d = 0; d < 6; ++d) pct[d] = 100.0 * hits[d] / used;
    return pct;
}

MahalanobisStats mahalanobis_stats(const McResult& result, const TerminalSpec& spec) {
    const Mat3 p_pos = spec.p_f.topLeftCorner<3, 3>();
    const Mat3 p_vel = spec.p_f.bottomRightCorner<3, 3>();
    Eigen::FullPivLU<Mat3> lu_pos(p_pos), lu_vel(p_vel);
    if (!lu_pos.isInvertible() || !lu_vel.isInvertible()) {
        throw DomainError("mahalanobis_stats: singular position/velocity block of P_f");
    }
    const Mat3 w_pos = lu_pos.inverse();
    const Mat3 w_vel = lu_vel.inverse();

    const int n = result.samples();
    std::vector<double> dp, dv;
    dp.reserve(n);
    dv.reserve(n);
    for (int i = 0; i < n; ++i) {
        if (result.failed[i]) continue;
        const Vec6 err = result.terminal_states.row(i).transpose() - spec.x_f;
        const Vec3 ep = err.head<3>();
        const Vec3 ev = err.tail<3>();
        dp.push_back(ep.dot(w_pos * ep));
        dv.push_back(ev.dot(w_vel * ev));
    }
    MahalanobisStats stats;
    stats.d2_position = Eigen::Map<VecX>(dp.data(), dp.size());
    stats.d2_velocity = Eigen::Map<VecX>(dv.data(), dv.size());
    stats.position = summarize(stats.d2_position);
    stats.velocity = summarize(stats.d2_velocity);
    return stats;
}

ControlUsage control_usage(const McResult& result, double vu_kms) {
    ControlUsage usage;
    const int n = result.samples();
    if (n == 0) return usage;
    const int nseg = result.controls.empty() ? 0 : static_cast<int>(result.controls[0].rows());
    usage.per_node_mean_kms.assign(nseg, 0.0);
    int used = 0;
    for (int i = 0; i < n; ++i) {
        if (result.failed[i]) continue;
        ++used;
        for (int k = 0; k < nseg; ++k) {
            usage.per_node_mean_kms[k] += result.controls[i].row(k).norm();
        }
    }
    if (used == 0) return usage;
    for (int k = 0; k < nseg; ++k) {
        usage.per_node_mean_kms[k] *= vu_kms / used;
        usage.total_kms += usage.per_node_mean_kms[k];
    }
    return usage;
}

double chance_violation_fraction(const McResult& result, double rho_u_vu) {
    long violations = 0;
    long total = 0;
    for (int i = 0; i < result.samples(); ++i) {
        if (result.failed[i]) continue;
        for (int k = 0; k < result.controls[i].rows(); ++k) {
            ++total;
            if (result.controls[i].row(k).norm() > rho_u_vu) ++violations;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(violations) / total;
}

}  // namespace gmsteer
