#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gmsteer/dynamics.hpp"
#include "gmsteer/gm_ops.hpp"
#include "gmsteer/rng.hpp"
#include "gmsteer/split_library.hpp"

using namespace gmsteer;

namespace {

// Independent oracle: state plus state-transition matrix integrated through
// the variational equations, so covariance propagation can be checked as
// Phi P Phi^T without touching the covariance path under test.
std::pair<Vec6, Mat6> propagate_with_stm(const Vec6& x0, double t0, double t1, double mu,
                                         const Rk45Options& opt = {}) {
    Eigen::Matrix<double, 42, 1> y;
    y.head<6>() = x0;
    Eigen::Map<Mat6>(y.data() + 6) = Mat6::Identity();
    auto rhs = [mu](double, const Eigen::Matrix<double, 42, 1>& s,
                    Eigen::Matrix<double, 42, 1>& ds) {
        const Vec6 x = s.head<6>();
        ds.head<6>() = two_body_derivative(x, mu);
        const Mat6 fx = two_body_jacobian(x, mu);
        Eigen::Map<const Mat6> phi(s.data() + 6);
        Eigen::Map<Mat6>(ds.data() + 6) = fx * phi;
    };
    rk45_integrate<42>(rhs, y, t0, t1, opt);
    return {y.head<6>(), Eigen::Map<Mat6>(y.data() + 6)};
}

Vec6 circular_state() {
    Vec6 x;
    x << 1.0, 0.0, 0.0, 0.0, 1.0, 0.0;
    return x;
}

Vec6 mars_initial_mean() {
    Vec6 x;
    x << -0.940, -0.345, 0.000, 0.328, -0.942, 0.000;
    return x;
}

Mat6 mars_initial_cov() {
    Mat6 p = Mat6::Zero();
    p.topLeftCorner<3, 3>() = 1e-4 * Mat3::Identity();
    p.bottomRightCorner<3, 3>() = 1e-5 * Mat3::Identity();
    return p;
}

double specific_energy(const Vec6& x, double mu) {
    return 0.5 * x.tail<3>().squaredNorm() - mu / x.head<3>().norm();
}

}  // namespace

TEST_CASE("two-body vector field values") {
    Vec6 x = circular_state();
    Vec6 d = two_body_derivative(x, 1.0);
    Vec6 expect;
    expect << 0.0, 1.0, 0.0, -1.0, 0.0, 0.0;
    CHECK((d - expect).cwiseAbs().maxCoeff() < 1e-15);

    Vec6 far;
    far << 2.0, 0.0, 0.0, 0.0, 0.0, 0.0;
    CHECK(two_body_derivative(far, 1.0)(3) == doctest::Approx(-0.25).epsilon(1e-15));

    Vec6 low = Vec6::Zero();
    low(0) = 1e-9;
    CHECK_THROWS_AS(two_body_derivative(low, 1.0), SingularityError);
    CHECK_THROWS_AS(two_body_jacobian(low, 1.0), SingularityError);
}

TEST_CASE("circular orbit closes after one period") {
    const Vec6 x0 = circular_state();
    const DynamicsModel model = DynamicsModel::two_body(1.0);
    const Vec6 x1 = propagate_state(x0, 0.0, 2.0 * M_PI, model);
    CHECK((x1 - x0).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("jacobian structure and gravity gradient") {
    Vec6 x = circular_state();
    Mat6 f = two_body_jacobian(x, 1.0);
    CHECK(f.topRightCorner<3, 3>().isApprox(Mat3::Identity(), 0.0));
    CHECK(f.topLeftCorner<3, 3>().cwiseAbs().maxCoeff() == 0.0);
    CHECK(f.bottomRightCorner<3, 3>().cwiseAbs().maxCoeff() == 0.0);
    Mat3 gg = f.bottomLeftCorner<3, 3>();
    CHECK(gg(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(gg(1, 1) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(gg(2, 2) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("jacobian matches central finite differences") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Vec6 x;
        x << 1.0 + 0.5 * rng.normal(), 0.5 * rng.normal(), 0.3 * rng.normal(),
            0.5 * rng.normal(), 1.0 + 0.3 * rng.normal(), 0.2 * rng.normal();
        if (x.head<3>().norm() < 0.3) continue;
        const Mat6 f = two_body_jacobian(x, 1.0);
        const double h = 1e-6;
        for (int j = 0; j < 6; ++j) {
            Vec6 xp = x, xm = x;
            xp(j) += h;
            xm(j) -= h;
            const Vec6 col = (two_body_derivative(xp, 1.0) - two_body_derivative(xm, 1.0)) / (2 * h);
            CHECK((f.col(j) - col).cwiseAbs().maxCoeff() < 1e-5);
        }
    }
}

TEST_CASE("zero process noise keeps a zero covariance at zero") {
    const DynamicsModel model = DynamicsModel::two_body(1.0);
    Gaussian g(circular_state(), Mat6::Zero());
    SegmentResult r = propagate_component(g, 0.0, 1.0, model);
    CHECK(r.gaussian_out.cov.cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.steps_taken > 0);
}

TEST_CASE("covariance propagation matches the STM oracle") {
    const DynamicsModel model = DynamicsModel::two_body(1.0);
    const Mat6 p0 = mars_initial_cov();

    SUBCASE("circular orbit, one full period") {
        Gaussian g(circular_state(), p0);
        SegmentResult r = propagate_component(g, 0.0, 2.0 * M_PI, model);
        CHECK((r.gaussian_out.mean - g.mean).cwiseAbs().maxCoeff() < 1e-8);
        auto [xf, phi] = propagate_with_stm(circular_state(), 0.0, 2.0 * M_PI, 1.0);
        const Mat6 expect = phi * p0 * phi.transpose();
        CHECK((r.gaussian_out.cov - expect).norm() / expect.norm() < 1e-6);
        (void)xf;
    }
    SUBCASE("transfer-like segment") {
        const double dt = (358.0 / 58.0) / 30.0;
        Gaussian g(mars_initial_mean(), p0);
        SegmentResult r = propagate_component(g, 0.0, dt, model);
        auto [xf, phi] = propagate_with_stm(mars_initial_mean(), 0.0, dt, 1.0);
        const Mat6 expect = phi * p0 * phi.transpose();
        CHECK((r.gaussian_out.cov - expect).norm() / expect.norm() < 1e-6);
        CHECK((r.gaussian_out.mean - xf).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("frozen-jacobian hook gives linear covariance growth") {
    DynamicsModel model = DynamicsModel::two_body(1.0);
    const double q = 1e-6;
    model.psd = q * MatX::Identity(6, 6);
    model.jacobian = [](const Vec6&) { return Mat6::Zero(); };
    Gaussian g(circular_state(), Mat6::Zero());
    const double dt = 0.7;
    SegmentResult r = propagate_component(g, 0.0, dt, model);
    const Mat6 expect = q * dt * Mat6::Identity();
    CHECK((r.gaussian_out.cov - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ballistic energy drift stays below 1e-9 over the transfer duration") {
    const DynamicsModel model = DynamicsModel::two_body(1.0);
    const Vec6 x0 = mars_initial_mean();
    const double e0 = specific_energy(x0, 1.0);
    const Vec6 x1 = propagate_state(x0, 0.0, 358.0 / 58.0, model);
    CHECK(std::abs(specific_energy(x1, 1.0) - e0) / std::abs(e0) < 1e-9);
}

TEST_CASE("time reversal returns the mean") {
    const DynamicsModel model = DynamicsModel::two_body(1.0);
    const Vec6 x0 = mars_initial_mean();
    const double t1 = 358.0 / 58.0;
    const Vec6 x1 = propagate_state(x0, 0.0, t1, model);
    const Vec6 back = propagate_state(x1, t1, 0.0, model);
    CHECK((back - x0).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("linearized covariance propagation is homogeneous in P") {
    const DynamicsModel model = DynamicsModel::two_body(1.0);
    const double alpha = 3.7;
    Gaussian g(mars_initial_mean(), mars_initial_cov());
    Gaussian gs(mars_initial_mean(), alpha * mars_initial_cov());
    // Tight integration tolerances isolate the property of the propagation
    // equations from step-control noise (absolute tolerance is not
    // scale-invariant).
    Rk45Options opt;
    opt.abs_tol = 1e-14;
    opt.rel_tol = 1e-12;
    SegmentResult a = propagate_component(g, 0.0, 0.5, model, opt);
    SegmentResult b = propagate_component(gs, 0.0, 0.5, model, opt);
    const double rel = (b.gaussian_out.cov - alpha * a.gaussian_out.cov).norm() /
                       (alpha * a.gaussian_out.cov.norm());
    CHECK(rel < 1e-9);
}

TEST_CASE("covariance stays PSD across segments") {
    const DynamicsModel model = DynamicsModel::two_body(1.0);
    Gaussian g(mars_initial_mean(), mars_initial_cov());
    const double dt = (358.0 / 58.0) / 30.0;
    for (int k = 0; k < 30; ++k) {
        SegmentResult r = propagate_component(g, k * dt, (k + 1) * dt, model);
        g = r.gaussian_out;
        Eigen::SelfAdjointEigenSolver<Mat6> es(g.cov, Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10 * g.cov.trace());
        CHECK((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff() <=
              1e-12 * g.cov.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("mixture propagation preserves weights, order, and component count") {
    const DynamicsModel model = DynamicsModel::two_body(1.0);
    SplitLibrary lib = split_library_l3_reference();
    Gaussian g(mars_initial_mean(), mars_initial_cov());
    GaussianMixture mix = split_gaussian(g, {3, 4}, lib);
    REQUIRE(mix.size() == 9);

    GaussianMixture out = propagate_mixture(mix, 0.0, 0.4, model);
    REQUIRE(out.size() == 9);
    for (int i = 0; i < 9; ++i) {
        CHECK(out.components[i].weight == mix.components[i].weight);
        SegmentResult single = propagate_component(mix.components[i].gaussian, 0.0, 0.4, model);
        CHECK(out.components[i].gaussian.mean.isApprox(single.gaussian_out.mean, 0.0));
        CHECK(out.components[i].gaussian.cov.isApprox(single.gaussian_out.cov, 0.0));
    }

    GaussianMixture threaded = propagate_mixture(mix, 0.0, 0.4, model, {}, 2);
    for (int i = 0; i < 9; ++i) {
        CHECK(threaded.components[i].gaussian.mean == out.components[i].gaussian.mean);
        CHECK(threaded.components[i].gaussian.cov == out.components[i].gaussian.cov);
    }
}

TEST_CASE("27-component propagation agrees with a sampling oracle in the mean") {
    const DynamicsModel model = DynamicsModel::two_body(1.0);
    SplitLibrary lib = split_library_l3_reference();
    Gaussian g(mars_initial_mean(), mars_initial_cov());
    GaussianMixture mix = split_gaussian(g, {3, 4, 5}, lib);
    REQUIRE(mix.size() == 27);

    const double dt = (358.0 / 58.0) / 30.0;
    Gaussian merged = collapse(propagate_mixture(mix, 0.0, dt, model));

    const int n = 10000;
    Rng rng(99);
    const MatX s = covariance_sqrt(g.cov);
    Vec6 sum = Vec6::Zero();
    MatX samples(n, 6);
    for (int i = 0; i < n; ++i) {
        Vec6 xi;
        for (int d = 0; d < 6; ++d) xi(d) = rng.normal();
        Vec6 x = propagate_state(g.mean + s * xi, 0.0, dt, model);
        samples.row(i) = x.transpose();
        sum += x;
    }
    const Vec6 sample_mean = sum / n;
    for (int d = 0; d < 6; ++d) {
        const double sd =
            std::sqrt((samples.col(d).array() - sample_mean(d)).square().sum() / (n - 1));
        const double se = sd / std::sqrt(static_cast<double>(n));
        CHECK(std::abs(merged.mean(d) - sample_mean(d)) < 3.0 * se);
    }
}

TEST_CASE("component failures carry the component index") {
    const DynamicsModel model = DynamicsModel::two_body(1.0);
    GaussianMixture mix;
    Gaussian ok(circular_state(), Mat6::Zero());
    Vec6 crash;
    crash << 1e-6, 0.0, 0.0, -10.0, 0.0, 0.0;  // plunges into the singularity guard
    mix.components.push_back({0.5, ok});
    mix.components.push_back({0.5, Gaussian(crash, Mat6::Zero())});
    try {
        propagate_mixture(mix, 0.0, 2.0, model);
        FAIL("expected a propagation failure");
    } catch (const IntegrationError& e) {
        CHECK(std::string(e.what()).find("component 1") != std::string::npos);
    }
}
