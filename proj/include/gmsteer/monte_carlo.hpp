/**
 * @file monte_carlo.hpp
 * @brief Sample-based validation of an optimized policy: closed-loop
 *        trajectory simulation per sample and dispersion statistics.
 */

#ifndef GMSTEER_MONTE_CARLO_HPP
#define GMSTEER_MONTE_CARLO_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "gmsteer/rng.hpp"
#include "gmsteer/steering.hpp"

namespace gmsteer {

// Two-sided 99.9% probability gate of a 1D Gaussian: P(|x| <= z sigma) = 0.999.
constexpr double kGate1dZ999 = 3.2905;
// 99.9% probability gate of the squared Mahalanobis distance for a 3D Gaussian
// (chi-square with 3 degrees of freedom).
constexpr double kGate3dChi2999 = 16.27;

struct McConfig {
    int n_samples = 5000;
    std::uint64_t seed = 0;
    bool process_noise = false;    // integrate F_w w(t) when Q != 0
    bool execution_error = false;  // draw du_k from the execution-error model
    int em_substeps = 100;         // Euler-Maruyama substeps per segment
    int threads = 1;

    void validate() const;
};

struct McResult {
    // Row per sample: terminal state (x..z in DU, xdot..zdot in VU).
    MatX terminal_states;
    // controls[sample] has one row per node: (ux, uy, uz) in VU.
    std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> controls;
    std::vector<std::uint8_t> failed;  // singularity-flagged samples, excluded from stats
    int failed_count = 0;

    int samples() const { return static_cast<int>(terminal_states.rows()); }
};

/// Closed-loop simulation of one sample: at each node
/// u_k = v_k + G_k (x - m_ref_k) + du_k, then the jump x += F_u u_k and the
/// nonlinear segment propagation (Euler-Maruyama with sqrt(Q dt) increments
/// when process noise is on, deterministic adaptive RK otherwise).
/// Returns the node states (pre-control, terminal last) and the controls.
std::pair<std::vector<Vec6>, Eigen::Matrix<double, Eigen::Dynamic, 3>> simulate_sample(
    const Vec6& x0, const ControlPolicy& policy, const SteeringProblem& problem,
    const McConfig& config, Rng& rng);

/// Runs the dispersion analysis. Sample i uses the counter-derived stream
/// (seed, i), so results are independent of execution order and thread count.
McResult run_monte_carlo(const SteeringProblem& problem, const ControlPolicy& policy,
                         const McConfig& config);

/// Percentage of unflagged samples with |x_i - x_f,i| <= 3.2905 sqrt(P_f[i,i])
/// per axis.
std::array<double, 6> gate_percentages(const McResult& result, const TerminalSpec& spec);

struct MahalanobisStats {
    VecX d2_position;  // squared distances over the position block
    VecX d2_velocity;
    struct Summary {
        double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
        double within_gate_percent = 0;  // d2 <= 16.27
    };
    Summary position;
    Summary velocity;
};

MahalanobisStats mahalanobis_stats(const McResult& result, const TerminalSpec& spec);

struct ControlUsage {
    std::vector<double> per_node_mean_kms;  // mean over samples of |u_k|
    double total_kms = 0.0;
};

ControlUsage control_usage(const McResult& result, double vu_kms);

/// Fraction of (sample, node) pairs whose control magnitude exceeds rho_u.
double chance_violation_fraction(const McResult& result, double rho_u_vu);

}  // namespace gmsteer

#endif
