/**
 * @file gmsteer_main.cpp
 * @brief Command-line pipeline: optimize a steering policy, propagate the
 *        moment trajectory, and validate by Monte Carlo dispersion analysis.
 *
 * Exit codes: 0 success, 2 solver non-convergence, 3 configuration error,
 * 4 runtime or numerical error.
 */

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "gmsteer/io.hpp"
#include "gmsteer/nlp.hpp"
#include "gmsteer/parallel.hpp"
#include "gmsteer/scenario.hpp"
#include "gmsteer/sqp.hpp"

namespace {

using namespace gmsteer;

struct CliArgs {
    std::string scenario;
    std::string out_dir;
    std::int64_t seed = -1;
    int samples = -1;
    double gamma = -1.0;
    int threads = -1;
};

ScenarioConfig load_with_overrides(const CliArgs& args) {
    ScenarioConfig config = load_scenario(args.scenario);
    if (args.seed >= 0) config.mc.seed = static_cast<std::uint64_t>(args.seed);
    if (args.samples > 0) config.mc.samples = args.samples;
    if (args.gamma > 0.0) config.gamma = args.gamma;
    if (args.threads > 0) config.solver.threads = args.threads;
    config.validate();
    return config;
}

int resolve_threads(const ScenarioConfig& config) {
    return config.solver.threads > 0 ? config.solver.threads : default_thread_count();
}

int run_optimize(const ScenarioConfig& config, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    SteeringProblem problem = config.steering_problem(out_dir);
    NlpProblem nlp(problem, resolve_threads(config));
    ControlPolicy guess = hohmann_initial_guess(problem);

    std::cout << "optimize: scenario " << config.name << ", " << nlp.nodes() << " control nodes, "
              << config.mixture_size() << " mixture components, seed total dv "
              << hohmann_total_dv(problem) * config.vu_kms() << " km/s\n";

    std::ofstream log(out_dir + "/solver_log.txt");
    log << "# iteration cost max_violation step_length\n";
    SolveResult result = solve(nlp, guess, config.solver, &log);

    save_policy(out_dir + "/policy.txt", result.policy);
    write_solve_report(out_dir + "/solve_report.json", result.report);

    std::cout << "optimize: status " << to_string(result.report.status) << ", "
              << result.report.iterations << " iterations, cost " << result.report.final_cost
              << " VU^2, nominal total dv " << cost_magnitude_sum(result.policy) * config.vu_kms()
              << " km/s\n";
    std::cout << "optimize: max equality violation " << result.report.max_equality_violation
              << ", max inequality violation " << result.report.max_inequality_violation
              << ", wall time " << result.report.wall_time_seconds << " s\n";
    return result.report.status == SolveStatus::converged ? 0 : 2;
}

int run_propagate(const ScenarioConfig& config, const std::string& out_dir) {
    SteeringProblem problem = config.steering_problem(out_dir);
    ControlPolicy policy = load_policy(out_dir + "/policy.txt");
    MomentTrajectory traj = forward_pass(problem, policy);
    write_moment_trajectory(out_dir, traj, policy, config);

    const TerminalResiduals res =
        terminal_constraint_residuals(traj.terminal_mean, traj.terminal_cov, problem.terminal);
    std::cout << "propagate: terminal mean residual " << res.mean_residual.cwiseAbs().maxCoeff()
              << ", smallest covariance eigenvalue residual " << res.eig_residuals.minCoeff()
              << "\n";
    return 0;
}

int run_montecarlo(const ScenarioConfig& config, const std::string& out_dir) {
    SteeringProblem problem = config.steering_problem(out_dir);
    ControlPolicy policy = load_policy(out_dir + "/policy.txt");

    McConfig mc;
    mc.n_samples = config.mc.samples;
    mc.seed = config.mc.seed;
    mc.process_noise = config.mc.process_noise;
    mc.execution_error = config.mc.execution_error;
    mc.threads = resolve_threads(config);

    McResult result = run_monte_carlo(problem, policy, mc);
    write_mc_results(out_dir, result, config, problem.terminal);

    const auto usage = control_usage(result, config.vu_kms());
    std::cout << "montecarlo: " << mc.n_samples << " samples (" << result.failed_count
              << " flagged), total mean dv " << usage.total_kms << " km/s\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-mixture distribution steering for impulsive trajectory design"};
    app.require_subcommand(1);

    CliArgs args;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--scenario", args.scenario, "preset name or scenario JSON path")->required();
        sub->add_option("--out", args.out_dir, "output directory")->required();
        sub->add_option("--seed", args.seed, "Monte Carlo master seed override");
        sub->add_option("--samples", args.samples, "Monte Carlo sample count override");
        sub->add_option("--gamma", args.gamma, "chance-constraint scaling override");
        sub->add_option("--threads", args.threads, "worker thread count");
        return sub;
    };
    CLI::App* cmd_optimize = add_common(app.add_subcommand("optimize", "solve for the control policy"));
    CLI::App* cmd_propagate = add_common(app.add_subcommand("propagate", "moment trajectory at the saved policy"));
    CLI::App* cmd_mc = add_common(app.add_subcommand("montecarlo", "dispersion analysis of the saved policy"));
    CLI::App* cmd_full = add_common(app.add_subcommand("full", "optimize, propagate, then Monte Carlo"));

    CLI11_PARSE(app, argc, argv);

    try {
        const gmsteer::ScenarioConfig config = load_with_overrides(args);
        std::filesystem::create_directories(args.out_dir);
        if (cmd_optimize->parsed()) return run_optimize(config, args.out_dir);
        if (cmd_propagate->parsed()) return run_propagate(config, args.out_dir);
        if (cmd_mc->parsed()) return run_montecarlo(config, args.out_dir);
        if (cmd_full->parsed()) {
            const int rc = run_optimize(config, args.out_dir);
            if (rc != 0) return rc;
            if (const int rp = run_propagate(config, args.out_dir); rp != 0) return rp;
            return run_montecarlo(config, args.out_dir);
        }
    } catch (const gmsteer::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
