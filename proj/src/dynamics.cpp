#include "gmsteer/dynamics.hpp"

#include <cmath>

#include "gmsteer/parallel.hpp"

namespace gmsteer {

Vec6 two_body_derivative(const Vec6& state, double mu) {
    const double rn = state.head<3>().norm();
    if (rn < kSingularityRadius) {
        throw SingularityError("two_body_derivative: |r| = " + std::to_string(rn) +
                               " DU below singularity guard");
    }
    Vec6 d;
    d.head<3>() = state.tail<3>();
    d.tail<3>() = -mu / (rn * rn * rn) * state.head<3>();
    return d;
}

Mat6 two_body_jacobian(const Vec6& state, double mu) {
    const Vec3 r = state.head<3>();
    const double rn = r.norm();
    if (rn < kSingularityRadius) {
        throw SingularityError("two_body_jacobian: |r| = " + std::to_string(rn) +
                               " DU below singularity guard");
    }
    Mat6 f = Mat6::Zero();
    f.topRightCorner<3, 3>() = Mat3::Identity();
    const double inv_r3 = 1.0 / (rn * rn * rn);
    f.bottomLeftCorner<3, 3>() =
        mu * inv_r3 * (3.0 / (rn * rn) * (r * r.transpose()) - Mat3::Identity());
    return f;
}

DynamicsModel DynamicsModel::two_body(double mu) {
    DynamicsModel m;
    m.mu = mu;
    m.noise_map = MatX::Identity(6, 6);
    m.psd = MatX::Zero(6, 6);
    return m;
}

Mat6 DynamicsModel::diffusion() const {
    if (psd.size() == 0) return Mat6::Zero();
    MatX fw = noise_map.size() > 0 ? noise_map : MatX::Identity(6, psd.rows());
    MatX d = fw * psd * fw.transpose();
    if (d.rows() != 6 || d.cols() != 6) {
        throw DomainError("DynamicsModel: F_w Q F_w^T is not 6x6");
    }
    Mat6 out = d;
    symmetrize(out);
    return out;
}

namespace {

using JointState = Eigen::Matrix<double, 42, 1>;

// y = [mean; vec(P)] with P stored column-major. The covariance derivative is
// assembled as M + M^T + D, which is bitwise symmetric, so P never needs
// re-symmetrization during integration.
struct JointRhs {
    const DynamicsModel& model;
    Mat6 diffusion;

    void operator()(double /*t*/, const JointState& y, JointState& dy) const {
        const Vec6 mean = y.head<6>();
        const Eigen::Map<const Mat6> p(y.data() + 6);
        dy.head<6>() = model.eval_field(mean);
        const Mat6 fx = model.eval_jacobian(mean);
        const Mat6 m = fx * p;
        Eigen::Map<Mat6> dp(dy.data() + 6);
        dp = m + m.transpose() + diffusion;
    }
};

}  // namespace

SegmentResult propagate_component(const Gaussian& g, double t0, double t1,
                                  const DynamicsModel& model, const Rk45Options& opt) {
    if (g.dim() != 6) throw DomainError("propagate_component: state dimension must be 6");

    JointState y;
    y.head<6>() = g.mean;
    Eigen::Map<Mat6>(y.data() + 6) = Mat6((g.cov + g.cov.transpose()) * 0.5);

    JointRhs rhs{model, model.diffusion()};
    const Rk45Stats stats = rk45_integrate<42>(rhs, y, t0, t1, opt);

    SegmentResult out;
    out.gaussian_out.mean = y.head<6>();
    Mat6 p = Eigen::Map<Mat6>(y.data() + 6);
    symmetrize(p);
    out.gaussian_out.cov = p;
    out.steps_taken = stats.steps_taken;
    out.max_error_estimate = stats.max_error_estimate;
    return out;
}

GaussianMixture propagate_mixture(const GaussianMixture& mix, double t0, double t1,
                                  const DynamicsModel& model, const Rk45Options& opt,
                                  int threads) {
    GaussianMixture out;
    out.components.resize(mix.components.size());
    parallel_for(static_cast<int>(mix.components.size()), threads, [&](int i) {
        try {
            const auto& c = mix.components[i];
            SegmentResult r = propagate_component(c.gaussian, t0, t1, model, opt);
            out.components[i] = {c.weight, std::move(r.gaussian_out)};
        } catch (const SingularityError& e) {
            throw SingularityError("component " + std::to_string(i) + ": " + e.what());
        } catch (const IntegrationError& e) {
            throw IntegrationError("component " + std::to_string(i) + ": " + e.what());
        }
    });
    return out;
}

Vec6 propagate_state(const Vec6& x, double t0, double t1, const DynamicsModel& model,
                     const Rk45Options& opt) {
    Vec6 y = x;
    auto rhs = [&model](double, const Vec6& s, Vec6& ds) { ds = model.eval_field(s); };
    rk45_integrate<6>(rhs, y, t0, t1, opt);
    return y;
}

}  // namespace gmsteer
