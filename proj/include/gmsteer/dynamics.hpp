/**
 * @file dynamics.hpp
 * @brief Two-body vector field and linearized mean/covariance propagation of
 *        Gaussian-mixture components over inter-node segments.
 */

#ifndef GMSTEER_DYNAMICS_HPP
#define GMSTEER_DYNAMICS_HPP

#include <functional>

#include "gmsteer/integrate.hpp"
#include "gmsteer/types.hpp"

namespace gmsteer {

class SingularityError : public IntegrationError {
public:
    explicit SingularityError(const std::string& msg) : IntegrationError(msg) {}
};

// Position norm below which two-body evaluation is rejected. The transfer
// never approaches the primary; reaching this radius indicates a runaway
// optimizer state that must surface loudly.
constexpr double kSingularityRadius = 1e-8;

/// (r_dot, v_dot) = (v, -mu r / |r|^3). Throws SingularityError near |r| = 0.
Vec6 two_body_derivative(const Vec6& state, double mu);

/// Jacobian of the two-body field: velocity block I3, gravity-gradient block
/// mu (3 rhat rhat^T - I) / |r|^3.
Mat6 two_body_jacobian(const Vec6& state, double mu);

/// Continuous dynamics plus process-noise model. A custom vector field and
/// Jacobian may be substituted (linear systems in tests); by default the
/// two-body field with the stored mu is used.
struct DynamicsModel {
    double mu = 1.0;
    MatX noise_map;  // F_w, n x p
    MatX psd;        // Q, p x p, constant power spectral density

    std::function<Vec6(const Vec6&)> field;     // optional override of f(x)
    std::function<Mat6(const Vec6&)> jacobian;  // optional override of F_x(x)

    static DynamicsModel two_body(double mu);

    Vec6 eval_field(const Vec6& x) const {
        return field ? field(x) : two_body_derivative(x, mu);
    }
    Mat6 eval_jacobian(const Vec6& x) const {
        return jacobian ? jacobian(x) : two_body_jacobian(x, mu);
    }

    /// F_w Q F_w^T, symmetrized; zero when no psd is configured.
    Mat6 diffusion() const;

    bool has_process_noise() const { return psd.size() > 0 && psd.cwiseAbs().maxCoeff() > 0.0; }
};

struct SegmentResult {
    Gaussian gaussian_out;
    long steps_taken = 0;
    double max_error_estimate = 0.0;
};

/// Propagates mean and covariance jointly from t0 to t1:
///   m' = f(m),  P' = F_x(m) P + P F_x(m)^T + F_w Q F_w^T,
/// with F_x evaluated along the mean trajectory. The covariance stays exactly
/// symmetric by construction of the right-hand side.
SegmentResult propagate_component(const Gaussian& g, double t0, double t1,
                                  const DynamicsModel& model, const Rk45Options& opt = {});

/// Propagates every component independently; weights and component count are
/// unchanged. Component failures are rethrown with the component index.
/// Components may be integrated concurrently; output order matches input
/// order regardless of scheduling.
GaussianMixture propagate_mixture(const GaussianMixture& mix, double t0, double t1,
                                  const DynamicsModel& model, const Rk45Options& opt = {},
                                  int threads = 1);

/// Point-trajectory propagation of a single state (Monte Carlo samples).
Vec6 propagate_state(const Vec6& x, double t0, double t1, const DynamicsModel& model,
                     const Rk45Options& opt = {});

}  // namespace gmsteer

#endif
