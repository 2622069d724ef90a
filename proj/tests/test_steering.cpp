#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gmsteer/rng.hpp"
#include "gmsteer/scenario.hpp"
#include "gmsteer/steering.hpp"

using namespace gmsteer;

namespace {

Mat3 random_spd3(Rng& rng, double scale) {
    Mat3 a;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a(i, j) = rng.normal();
    return scale * (a.transpose() * a + 1e-3 * Mat3::Identity());
}

Mat63 velocity_impulse_map() {
    Mat63 f = Mat63::Zero();
    f.bottomRows<3>() = Mat3::Identity();
    return f;
}

// Double-integrator test field: linear dynamics with a closed-form transition
// matrix, used to check the forward pass against the discrete recursion.
DynamicsModel double_integrator() {
    DynamicsModel m = DynamicsModel::two_body(1.0);
    m.field = [](const Vec6& x) {
        Vec6 d = Vec6::Zero();
        d.head<3>() = x.tail<3>();
        return d;
    };
    m.jacobian = [](const Vec6&) {
        Mat6 f = Mat6::Zero();
        f.topRightCorner<3, 3>() = Mat3::Identity();
        return f;
    };
    return m;
}

Mat6 double_integrator_phi(double dt) {
    Mat6 phi = Mat6::Identity();
    phi.topRightCorner<3, 3>() = dt * Mat3::Identity();
    return phi;
}

}  // namespace

TEST_CASE("node_update examples") {
    Rng rng(11);
    const Mat63 f_u = velocity_impulse_map();
    Vec6 mean;
    mean << 1.0, 2.0, 3.0, 0.1, 0.2, 0.3;
    Mat6 cov = Mat6::Identity() * 0.5;

    SUBCASE("zero gain and execution error shift the mean only") {
        Vec3 v(0.01, -0.02, 0.03);
        auto [m, p] = node_update(mean, cov, v, Mat36::Zero(), f_u, Mat3::Zero());
        CHECK((m - (mean + f_u * v)).cwiseAbs().maxCoeff() == 0.0);
        CHECK(p.isApprox(cov, 0.0));
    }
    SUBCASE("execution error adds to the velocity block") {
        const Mat3 c = random_spd3(rng, 1e-4);
        auto [m, p] = node_update(mean, cov, Vec3::Zero(), Mat36::Zero(), f_u, c);
        CHECK(m.isApprox(mean, 0.0));
        CHECK((p.bottomRightCorner<3, 3>() - (cov.bottomRightCorner<3, 3>() + c))
                  .cwiseAbs()
                  .maxCoeff() < 1e-15);
        CHECK(p.topLeftCorner<3, 3>().isApprox(cov.topLeftCorner<3, 3>(), 0.0));
    }
    SUBCASE("full velocity cancellation replaces the velocity block") {
        Mat36 gain = Mat36::Zero();
        gain.rightCols<3>() = -Mat3::Identity();
        const Mat3 c = random_spd3(rng, 1e-5);
        Mat6 p0 = Mat6::Zero();
        p0.topLeftCorner<3, 3>() = random_spd3(rng, 1e-2);
        p0.bottomRightCorner<3, 3>() = random_spd3(rng, 1e-3);
        auto [m, p] = node_update(mean, p0, Vec3::Zero(), gain, f_u, c);
        (void)m;
        CHECK((p.bottomRightCorner<3, 3>() - c).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(p.topLeftCorner<3, 3>().isApprox(p0.topLeftCorner<3, 3>(), 1e-14));
    }
}

TEST_CASE("control_covariance examples") {
    Rng rng(12);
    const Mat3 exec = random_spd3(rng, 1e-4);
    CHECK(control_covariance(Mat36::Zero(), Mat6::Identity(), exec).isApprox(exec, 0.0));

    Mat36 sel = Mat36::Zero();
    sel.rightCols<3>() = Mat3::Identity();
    Mat6 cov = Mat6::Zero();
    cov.topLeftCorner<3, 3>() = random_spd3(rng, 1.0);
    cov.bottomRightCorner<3, 3>() = random_spd3(rng, 0.1);
    CHECK(control_covariance(sel, cov, Mat3::Zero())
              .isApprox(cov.bottomRightCorner<3, 3>(), 1e-14));

    for (int trial = 0; trial < 50; ++trial) {
        Mat36 g;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 6; ++c) g(r, c) = rng.normal();
        Mat6 p = Mat6::Zero();
        p.topLeftCorner<3, 3>() = random_spd3(rng, 1.0);
        p.bottomRightCorner<3, 3>() = random_spd3(rng, 1.0);
        Mat3 puu = control_covariance(g, p, Mat3::Zero());
        Eigen::SelfAdjointEigenSolver<Mat3> es(puu, Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, puu.trace()));
    }
}

TEST_CASE("chance constraint arithmetic") {
    ChanceConstraintParams params;
    params.rho_u = 0.0254578;
    params.beta = 0.05;
    params.gamma = 1.0;
    params.control_dim = 3;

    CHECK(chance_constraint_value(Vec3::Zero(), Mat3::Zero(), params) ==
          doctest::Approx(-params.rho_u).epsilon(1e-15));

    const double mult = chance_multiplier(0.05, 3);
    CHECK(mult == doctest::Approx(std::sqrt(2.0 * std::log(20.0)) + std::sqrt(3.0)).epsilon(1e-15));
    CHECK(mult == doctest::Approx(4.1799).epsilon(1e-4));

    // lambda_max = 1e-4 VU^2 -> stochastic term 0.041799 VU.
    const Mat3 puu = 1e-4 * Mat3::Identity();
    const double value = chance_constraint_value(Vec3::Zero(), puu, params);
    CHECK(value + params.rho_u == doctest::Approx(0.01 * mult).epsilon(1e-12));

    ChanceConstraintParams doubled = params;
    doubled.gamma = 2.0;
    const double v2 = chance_constraint_value(Vec3::Zero(), puu, doubled);
    CHECK(v2 + params.rho_u == doctest::Approx(2.0 * (value + params.rho_u)).epsilon(1e-13));

    params.beta = -0.1;
    CHECK_THROWS_AS(chance_constraint_value(Vec3::Zero(), puu, params), DomainError);
}

TEST_CASE("chance constraint monotonicity properties") {
    Rng rng(13);
    for (int trial = 0; trial < 1000; ++trial) {
        ChanceConstraintParams p;
        p.rho_u = 0.01 + rng.uniform();
        p.beta = 0.01 + 0.9 * rng.uniform();
        p.gamma = 1.0 + 2.0 * rng.uniform();
        Vec3 v(rng.normal(), rng.normal(), rng.normal());
        v *= 0.01;
        const Mat3 puu = random_spd3(rng, 1e-4);
        const double base = chance_constraint_value(v, puu, p);

        ChanceConstraintParams pg = p;
        pg.gamma = p.gamma * (1.0 + rng.uniform());
        CHECK(chance_constraint_value(v, puu, pg) >= base - 1e-15);

        ChanceConstraintParams pb = p;
        pb.beta = std::min(1.0, p.beta * (1.0 + rng.uniform()));
        CHECK(chance_constraint_value(v, puu, pb) <= base + 1e-15);

        const double scale = 1.0 + rng.uniform();
        CHECK(chance_constraint_value(scale * v, puu, p) >= base - 1e-15);
        CHECK(chance_constraint_value(v, scale * puu, p) >= base - 1e-15);
    }
}

TEST_CASE("terminal constraint residuals") {
    TerminalSpec spec;
    spec.x_f = Vec6::Ones();
    spec.p_f = Mat6::Identity() * 2.0;

    auto at = terminal_constraint_residuals(Vec6::Ones(), spec.p_f, spec);
    CHECK(at.mean_residual.cwiseAbs().maxCoeff() == 0.0);
    CHECK(at.eig_residuals.cwiseAbs().maxCoeff() < 1e-14);

    auto half = terminal_constraint_residuals(Vec6::Zero(), Mat6::Identity(), spec);
    CHECK(half.mean_residual.isApprox(-Vec6::Ones(), 0.0));
    CHECK(half.eig_residuals.minCoeff() == doctest::Approx(1.0).epsilon(1e-14));

    Mat6 pf = Mat6::Identity();
    pf(0, 0) = 2.0;
    Mat6 pn = Mat6::Identity();
    pn(0, 0) = 1.0;
    pn(1, 1) = 2.0;
    TerminalSpec spec2;
    spec2.x_f = Vec6::Zero();
    spec2.p_f = pf;
    auto mixed = terminal_constraint_residuals(Vec6::Zero(), pn, spec2);
    CHECK(mixed.eig_residuals.minCoeff() == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("forward pass: ballistic terminal mean matches a direct integration") {
    ScenarioConfig config = scenario_preset("mars_L1");
    config.node_count = 2;
    SteeringProblem problem = config.steering_problem();
    ControlPolicy policy = ControlPolicy::zero(1);
    MomentTrajectory traj = forward_pass(problem, policy);

    const Vec6 oracle = propagate_state(config.initial_mean(), 0.0, config.duration_tu(),
                                        problem.dynamics, problem.ode);
    CHECK((traj.terminal_mean - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("forward pass: zero policy misses the target badly") {
    ScenarioConfig config = scenario_preset("mars_L1");
    SteeringProblem problem = config.steering_problem();
    ControlPolicy policy = ControlPolicy::zero(problem.schedule.segments());
    MomentTrajectory traj = forward_pass(problem, policy);
    CHECK((traj.terminal_mean - problem.terminal.x_f).norm() > 0.1);
}

TEST_CASE("forward pass with empty split dims equals the single-Gaussian pipeline") {
    ScenarioConfig config = scenario_preset("mars_L1");
    SteeringProblem problem = config.steering_problem();
    const int nseg = problem.schedule.segments();
    ControlPolicy policy = ControlPolicy::zero(nseg);
    Rng rng(5);
    for (int k = 0; k < nseg; ++k) {
        policy.v[k] = 0.003 * Vec3(rng.normal(), rng.normal(), rng.normal());
    }
    ControlPolicy copy = policy;
    MomentTrajectory traj = forward_pass(problem, policy);

    // Manual recursion without any mixture machinery.
    Gaussian g = problem.initial;
    const auto times = problem.schedule.times();
    for (int k = 0; k < nseg; ++k) {
        auto [m, p] = node_update(g.mean, g.cov, copy.v[k], copy.gains[k], problem.schedule.f_u,
                                  problem.exec_error.cov);
        SegmentResult r = propagate_component({m, p}, times[k], times[k + 1], problem.dynamics,
                                              problem.ode);
        g = r.gaussian_out;
    }
    CHECK((traj.terminal_mean - g.mean).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((traj.terminal_cov - g.cov).cwiseAbs().maxCoeff() < 1e-16);
}

TEST_CASE("forward pass reproduces the discrete linear covariance recursion") {
    ScenarioConfig config = scenario_preset("mars_L1");
    config.node_count = 6;
    SteeringProblem problem = config.steering_problem();
    problem.dynamics = double_integrator();
    const int nseg = problem.schedule.segments();
    const double dt = (problem.schedule.tN - problem.schedule.t0) / nseg;

    Rng rng(17);
    ControlPolicy policy = ControlPolicy::zero(nseg);
    for (int k = 0; k < nseg; ++k) {
        policy.v[k] = 0.01 * Vec3(rng.normal(), rng.normal(), rng.normal());
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 6; ++c) policy.gains[k](r, c) = 0.1 * rng.normal();
    }
    MomentTrajectory traj = forward_pass(problem, policy);

    const Mat6 phi = double_integrator_phi(dt);
    Vec6 mean = problem.initial.mean;
    Mat6 cov = problem.initial.cov;
    for (int k = 0; k < nseg; ++k) {
        CHECK((traj.mean_minus[k] - mean).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((traj.cov_minus[k] - cov).cwiseAbs().maxCoeff() < 1e-10);
        const Mat6 a = Mat6::Identity() + problem.schedule.f_u * policy.gains[k];
        mean = phi * (mean + problem.schedule.f_u * policy.v[k]);
        cov = phi * (a * cov * a.transpose()) * phi.transpose();
    }
    CHECK((traj.terminal_mean - mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((traj.terminal_cov - cov).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("forward pass is deterministic and ref_means reach a fixed point") {
    ScenarioConfig config = scenario_preset("mars_L27");
    config.node_count = 7;  // keep the mixture pipeline but stay quick
    SteeringProblem problem = config.steering_problem();
    const int nseg = problem.schedule.segments();
    Rng rng(23);
    ControlPolicy policy = ControlPolicy::zero(nseg);
    for (int k = 0; k < nseg; ++k) {
        policy.v[k] = 0.005 * Vec3(rng.normal(), rng.normal(), rng.normal());
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 6; ++c) policy.gains[k](r, c) = 0.05 * rng.normal();
    }

    ControlPolicy p1 = policy;
    MomentTrajectory t1 = forward_pass(problem, p1);
    ControlPolicy p2 = p1;
    MomentTrajectory t2 = forward_pass(problem, p2);

    CHECK(t1.terminal_mean == t2.terminal_mean);
    CHECK(t1.terminal_cov == t2.terminal_cov);
    for (int k = 0; k < nseg; ++k) {
        CHECK(t1.mean_minus[k] == t2.mean_minus[k]);
        CHECK(t1.puu[k] == t2.puu[k]);
        CHECK(p1.ref_means[k] == p2.ref_means[k]);  // fixed point of the overwrite
    }
}

TEST_CASE("cost and gradient") {
    ControlPolicy policy = ControlPolicy::zero(3);
    CHECK(cost(policy) == 0.0);

    policy.v[1] = Vec3(1.0, 2.0, 3.0);
    CHECK(cost(policy) == doctest::Approx(14.0).epsilon(1e-15));
    auto grad = cost_gradient(policy);
    CHECK(grad[1].isApprox(Vec3(2.0, 4.0, 6.0), 0.0));
    CHECK(grad[0].cwiseAbs().maxCoeff() == 0.0);
    CHECK(cost_magnitude_sum(policy) == doctest::Approx(std::sqrt(14.0)).epsilon(1e-15));

    // Central finite differences on a random policy.
    Rng rng(31);
    for (int k = 0; k < 3; ++k) policy.v[k] = Vec3(rng.normal(), rng.normal(), rng.normal());
    grad = cost_gradient(policy);
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
        for (int d = 0; d < 3; ++d) {
            ControlPolicy up = policy, dn = policy;
            up.v[k](d) += h;
            dn.v[k](d) -= h;
            const double fd = (cost(up) - cost(dn)) / (2.0 * h);
            CHECK(std::abs(fd - grad[k](d)) < 1e-8);
        }
    }
}
