/**
 * @file scenario.hpp
 * @brief Scenario configuration: physical constants, boundary conditions,
 *        constraint parameters, and pipeline settings, with built-in presets
 *        and JSON file loading. All physical inputs carry explicit unit
 *        suffixes in their key names; conversions happen once at load.
 */

#ifndef GMSTEER_SCENARIO_HPP
#define GMSTEER_SCENARIO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "gmsteer/steering.hpp"
#include "gmsteer/types.hpp"

namespace gmsteer {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SolverConfig {
    std::string algorithm = "sqp";   // "sqp" or "auglag"
    int max_iterations = 200;
    double tol_feasibility = 1e-6;   // scaled equality/inequality violation
    double tol_stationarity = 1e-3;  // Lagrangian gradient infinity norm
    double fd_step = 1e-6;           // forward-difference step scale
    double step_cap = 2.0;           // infinity-norm cap on SQP steps
    bool gain_bound_enabled = false; // box bound on feedback gains
    double gain_bound = 10.0;
    int threads = 0;                 // 0 -> hardware concurrency
};

struct McSettings {
    int samples = 5000;
    std::uint64_t seed = 20250810;
    bool process_noise = false;
    bool execution_error = false;
};

struct ScenarioConfig {
    std::string name = "custom";

    // Nondimensionalization: DU in km and TU in days define VU = DU/TU.
    double du_km = 149597870.7;
    double tu_days = 58.0;

    double mu = 1.0;  // DU^3/TU^2
    Vec3 r0_du = Vec3::Zero();
    Vec3 v0_vu = Vec3::Zero();
    Vec3 rf_du = Vec3::Zero();
    Vec3 vf_vu = Vec3::Zero();
    double duration_days = 0.0;
    int node_count = 0;

    Mat6 p0 = Mat6::Zero();  // initial covariance, DU^2 / VU^2 blocks
    Mat6 pf = Mat6::Zero();  // target terminal covariance

    double rho_u_kms = 0.0;
    double beta = 0.05;
    double gamma = 1.0;

    MatX f_w;       // process-noise map, 6 x p
    MatX q_psd;     // power spectral density, p x p (zero by default)
    Mat63 f_u;      // control influence
    Mat3 exec_cov = Mat3::Zero();  // execution-error covariance, VU^2

    int split_library_size = 1;    // 1 disables splitting
    double split_lambda = 0.001;
    std::vector<int> split_dims;

    McSettings mc;
    SolverConfig solver;

    double vu_kms() const { return du_km / (tu_days * 86400.0); }
    double duration_tu() const { return duration_days / tu_days; }
    double rho_u_vu() const { return rho_u_kms / vu_kms(); }
    int mixture_size() const;  // split_library_size ^ split_dims.size()

    Vec6 initial_mean() const;
    Vec6 target_state() const;

    void validate() const;

    /// Assembles the forward-pass problem (split library resolved through the
    /// optional cache directory).
    SteeringProblem steering_problem(const std::string& cache_dir = "") const;
};

/// Built-in presets: "mars_L1", "mars_L27", "mars_L243".
ScenarioConfig scenario_preset(const std::string& name);
std::vector<std::string> scenario_preset_names();

/// Loads a scenario from a JSON file; unknown keys are rejected, missing or
/// invalid fields are reported by name.
ScenarioConfig load_scenario_file(const std::string& path);

/// Resolves a --scenario argument: preset name or path to a JSON file.
ScenarioConfig load_scenario(const std::string& name_or_path);

/// Writes the scenario as JSON (the same schema load_scenario_file accepts).
void save_scenario_file(const std::string& path, const ScenarioConfig& config);

}  // namespace gmsteer

#endif
