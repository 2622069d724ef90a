/**
 * @file io.hpp
 * @brief Artifact persistence: policy files, result CSVs, and reports.
 *
 * All numeric output is printed with 17 significant digits through a fixed
 * "%.17g" format, so rewriting a loaded artifact reproduces it byte for byte
 * and repeated runs with identical inputs produce identical files.
 */

#ifndef GMSTEER_IO_HPP
#define GMSTEER_IO_HPP

#include <string>

#include "gmsteer/monte_carlo.hpp"
#include "gmsteer/scenario.hpp"
#include "gmsteer/sqp.hpp"
#include "gmsteer/steering.hpp"

namespace gmsteer {

std::string format_number(double v);

/// Plain-text matrix blocks: per node the open-loop control, the gain matrix,
/// and the reference mean produced by the forward pass.
void save_policy(const std::string& path, const ControlPolicy& policy);
ControlPolicy load_policy(const std::string& path);

/// Solve report as JSON. Wall time is deliberately omitted so files from
/// repeated runs compare equal; callers report timing on the console.
void write_solve_report(const std::string& path, const SolveReport& report);

/// Per-node moments as CSVs under out_dir: nodes.csv (means),
/// covariances.csv and control_covariances.csv (long form with a units
/// column), dv_nominal.csv (per-node impulse magnitudes), trajectory.csv
/// (densely sampled mean path), ellipses.csv (99.75% two-dimensional position
/// covariance ellipses per node).
void write_moment_trajectory(const std::string& out_dir, const MomentTrajectory& traj,
                             const ControlPolicy& policy, const ScenarioConfig& config);

/// Monte Carlo artifacts under out_dir: terminal_states.csv, controls.csv,
/// and summary.json (gate percentages, Mahalanobis summaries, control usage,
/// flags).
void write_mc_results(const std::string& out_dir, const McResult& result,
                      const ScenarioConfig& config, const TerminalSpec& spec);

}  // namespace gmsteer

#endif
