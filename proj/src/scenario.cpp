#include "gmsteer/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace gmsteer {

using nlohmann::json;

int ScenarioConfig::mixture_size() const {
    int m = 1;
    for (size_t i = 0; i < split_dims.size(); ++i) m *= split_library_size;
    return m;
}

Vec6 ScenarioConfig::initial_mean() const {
    Vec6 x;
    x << r0_du, v0_vu;
    return x;
}

Vec6 ScenarioConfig::target_state() const {
    Vec6 x;
    x << rf_du, vf_vu;
    return x;
}

void ScenarioConfig::validate() const {
    if (!(mu > 0.0)) throw ConfigError("scenario field mu: must be positive");
    if (!(du_km > 0.0)) throw ConfigError("scenario field du_km: must be positive");
    if (!(tu_days > 0.0)) throw ConfigError("scenario field tu_days: must be positive");
    if (!(duration_days > 0.0)) throw ConfigError("scenario field duration_days: must be positive");
    if (node_count < 2) throw ConfigError("scenario field node_count: need at least 2 nodes");
    if (!(rho_u_kms > 0.0)) throw ConfigError("scenario field rho_u_kms: must be positive");
    if (!(beta > 0.0) || beta > 1.0) throw ConfigError("scenario field beta: must be in (0,1]");
    if (!(gamma >= 1.0)) throw ConfigError("scenario field gamma: must be >= 1");

    auto check_psd = [](const MatX& m, const std::string& field) {
        if ((m - m.transpose()).cwiseAbs().maxCoeff() >
            1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
            throw ConfigError("scenario field " + field + ": matrix not symmetric");
        }
        Eigen::SelfAdjointEigenSolver<MatX> es(m, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() <
            -kPsdRelTol * std::max(es.eigenvalues().maxCoeff(), 1e-300)) {
            throw ConfigError("scenario field " + field + ": matrix not positive semidefinite");
        }
    };
    check_psd(p0, "p0");
    check_psd(pf, "pf");
    check_psd(exec_cov, "exec_cov_vu2");
    if (q_psd.size() > 0) {
        check_psd(q_psd, "q_psd");
        if (f_w.size() == 0 || f_w.rows() != 6 || f_w.cols() != q_psd.rows()) {
            throw ConfigError("scenario field f_w: shape must be 6 x q_psd rows");
        }
    }

    if (split_library_size != 1 && (split_library_size < 3 || split_library_size > 5)) {
        throw ConfigError("scenario field split.library: must be 1 (disabled) or in {3,4,5}");
    }
    if (split_library_size == 1 && !split_dims.empty()) {
        throw ConfigError("scenario field split.dims: nonempty but split.library is 1");
    }
    std::set<int> seen;
    for (int d : split_dims) {
        if (d < 0 || d >= 6) throw ConfigError("scenario field split.dims: index " + std::to_string(d) + " out of range [0,6)");
        if (!seen.insert(d).second) throw ConfigError("scenario field split.dims: duplicate index " + std::to_string(d));
    }
    if (!(split_lambda > 0.0)) throw ConfigError("scenario field split.lambda: must be positive");
    if (mc.samples < 1) throw ConfigError("scenario field mc.samples: must be >= 1");
    if (solver.max_iterations < 0) throw ConfigError("scenario field solver.max_iterations: must be >= 0");
}

SteeringProblem ScenarioConfig::steering_problem(const std::string& cache_dir) const {
    validate();
    SteeringProblem p;
    p.initial = Gaussian(initial_mean(), p0);
    p.schedule.t0 = 0.0;
    p.schedule.tN = duration_tu();
    p.schedule.node_count = node_count;
    p.schedule.f_u = f_u;
    p.dynamics = DynamicsModel::two_body(mu);
    if (q_psd.size() > 0) {
        p.dynamics.noise_map = f_w;
        p.dynamics.psd = q_psd;
    }
    p.exec_error.cov = exec_cov;
    p.chance.rho_u = rho_u_vu();
    p.chance.beta = beta;
    p.chance.gamma = gamma;
    p.chance.control_dim = 3;
    p.terminal.x_f = target_state();
    p.terminal.p_f = pf;
    p.split_dims = split_dims;
    p.library = (split_library_size == 1) ? split_library_l3_reference()
                                          : split_library_for(split_library_size, split_lambda, cache_dir);
    return p;
}

ScenarioConfig scenario_preset(const std::string& name) {
    ScenarioConfig c;
    c.name = name;
    c.mu = 1.0;
    c.du_km = 149597870.7;
    c.tu_days = 58.0;
    c.r0_du << -0.940, -0.345, 0.000;
    c.v0_vu << 0.328, -0.942, 0.000;
    c.rf_du << -1.154, 1.183, 0.053;
    c.vf_vu << -0.551, -0.498, 0.003;
    c.duration_days = 358.0;
    c.node_count = 31;
    c.p0.setZero();
    c.p0.topLeftCorner<3, 3>() = 1e-4 * Mat3::Identity();
    c.p0.bottomRightCorner<3, 3>() = 1e-5 * Mat3::Identity();
    c.pf.setZero();
    c.pf.topLeftCorner<3, 3>() = 1e-6 * Mat3::Identity();
    c.pf.bottomRightCorner<3, 3>() = 1e-7 * Mat3::Identity();
    c.rho_u_kms = 0.76;
    c.beta = 0.05;
    c.gamma = 1.0;
    c.f_w = MatX::Identity(6, 6);
    c.q_psd = MatX::Zero(6, 6);
    c.f_u.setZero();
    c.f_u.bottomRows<3>() = Mat3::Identity();
    c.exec_cov.setZero();

    if (name == "mars_L1") {
        c.split_library_size = 1;
        c.split_dims = {};
    } else if (name == "mars_L27") {
        c.split_library_size = 3;
        c.split_dims = {3, 4, 5};  // velocity dimensions
    } else if (name == "mars_L243") {
        c.split_library_size = 3;
        c.split_dims = {0, 1, 3, 4, 5};  // in-plane position plus velocity
    } else {
        throw ConfigError("unknown scenario preset '" + name + "'");
    }
    c.validate();
    return c;
}

std::vector<std::string> scenario_preset_names() { return {"mars_L1", "mars_L27", "mars_L243"}; }

namespace {

Vec3 parse_vec3(const json& arr, const std::string& field) {
    if (!arr.is_array() || arr.size() != 3) throw ConfigError("scenario field " + field + ": expected array of 3 numbers");
    Vec3 v;
    for (int i = 0; i < 3; ++i) v(i) = arr.at(i).get<double>();
    return v;
}

MatX parse_matrix(const json& rows, const std::string& field) {
    if (!rows.is_array() || rows.empty()) throw ConfigError("scenario field " + field + ": expected array of rows");
    const size_t ncols = rows.at(0).size();
    MatX m(rows.size(), ncols);
    for (size_t i = 0; i < rows.size(); ++i) {
        if (!rows.at(i).is_array() || rows.at(i).size() != ncols) {
            throw ConfigError("scenario field " + field + ": ragged rows");
        }
        for (size_t j = 0; j < ncols; ++j) m(i, j) = rows.at(i).at(j).get<double>();
    }
    return m;
}

json matrix_to_json(const MatX& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

template <class T>
T require(const json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("scenario field " + key + ": missing");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("scenario field " + key + ": wrong type");
    }
}

}  // namespace

ScenarioConfig load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("scenario file " + path + ": " + e.what());
    }

    ScenarioConfig c;
    if (j.contains("preset")) {
        c = scenario_preset(j.at("preset").get<std::string>());
    }
    if (j.contains("name")) c.name = j.at("name").get<std::string>();

    auto opt = [&](const char* key, auto& target) {
        using T = std::decay_t<decltype(target)>;
        if (j.contains(key)) target = require<T>(j, key);
    };
    opt("mu_du3_tu2", c.mu);
    opt("du_km", c.du_km);
    opt("tu_days", c.tu_days);
    opt("duration_days", c.duration_days);
    opt("node_count", c.node_count);
    opt("rho_u_kms", c.rho_u_kms);
    opt("beta", c.beta);
    opt("gamma", c.gamma);

    if (j.contains("r0_du")) c.r0_du = parse_vec3(j.at("r0_du"), "r0_du");
    if (j.contains("v0_vu")) c.v0_vu = parse_vec3(j.at("v0_vu"), "v0_vu");
    if (j.contains("rf_du")) c.rf_du = parse_vec3(j.at("rf_du"), "rf_du");
    if (j.contains("vf_vu")) c.vf_vu = parse_vec3(j.at("vf_vu"), "vf_vu");

    if (j.contains("p0_pos_du2")) c.p0.topLeftCorner<3, 3>() = require<double>(j, "p0_pos_du2") * Mat3::Identity();
    if (j.contains("p0_vel_vu2")) c.p0.bottomRightCorner<3, 3>() = require<double>(j, "p0_vel_vu2") * Mat3::Identity();
    if (j.contains("pf_pos_du2")) c.pf.topLeftCorner<3, 3>() = require<double>(j, "pf_pos_du2") * Mat3::Identity();
    if (j.contains("pf_vel_vu2")) c.pf.bottomRightCorner<3, 3>() = require<double>(j, "pf_vel_vu2") * Mat3::Identity();
    if (j.contains("p0_matrix")) c.p0 = parse_matrix(j.at("p0_matrix"), "p0_matrix");
    if (j.contains("pf_matrix")) c.pf = parse_matrix(j.at("pf_matrix"), "pf_matrix");
    if (j.contains("f_w")) c.f_w = parse_matrix(j.at("f_w"), "f_w");
    if (j.contains("q_psd")) c.q_psd = parse_matrix(j.at("q_psd"), "q_psd");
    if (j.contains("f_u")) c.f_u = parse_matrix(j.at("f_u"), "f_u");
    if (j.contains("exec_cov_vu2")) c.exec_cov = parse_matrix(j.at("exec_cov_vu2"), "exec_cov_vu2");

    if (j.contains("split")) {
        const json& s = j.at("split");
        if (s.contains("library")) c.split_library_size = require<int>(s, "library");
        if (s.contains("lambda")) c.split_lambda = require<double>(s, "lambda");
        if (s.contains("dims")) {
            c.split_dims.clear();
            for (const auto& d : s.at("dims")) c.split_dims.push_back(d.get<int>());
        }
    }
    if (j.contains("mc")) {
        const json& m = j.at("mc");
        if (m.contains("samples")) c.mc.samples = require<int>(m, "samples");
        if (m.contains("seed")) c.mc.seed = m.at("seed").get<std::uint64_t>();
        if (m.contains("process_noise")) c.mc.process_noise = m.at("process_noise").get<bool>();
        if (m.contains("execution_error")) c.mc.execution_error = m.at("execution_error").get<bool>();
    }
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        if (s.contains("algorithm")) c.solver.algorithm = s.at("algorithm").get<std::string>();
        if (s.contains("max_iterations")) c.solver.max_iterations = require<int>(s, "max_iterations");
        if (s.contains("tol_feasibility")) c.solver.tol_feasibility = require<double>(s, "tol_feasibility");
        if (s.contains("tol_stationarity")) c.solver.tol_stationarity = require<double>(s, "tol_stationarity");
        if (s.contains("fd_step")) c.solver.fd_step = require<double>(s, "fd_step");
        if (s.contains("step_cap")) c.solver.step_cap = require<double>(s, "step_cap");
        if (s.contains("gain_bound_enabled")) c.solver.gain_bound_enabled = s.at("gain_bound_enabled").get<bool>();
        if (s.contains("gain_bound")) c.solver.gain_bound = require<double>(s, "gain_bound");
        if (s.contains("threads")) c.solver.threads = require<int>(s, "threads");
    }

    c.validate();
    return c;
}

ScenarioConfig load_scenario(const std::string& name_or_path) {
    for (const auto& preset : scenario_preset_names()) {
        if (name_or_path == preset) return scenario_preset(name_or_path);
    }
    return load_scenario_file(name_or_path);
}

void save_scenario_file(const std::string& path, const ScenarioConfig& c) {
    json j;
    j["name"] = c.name;
    j["mu_du3_tu2"] = c.mu;
    j["du_km"] = c.du_km;
    j["tu_days"] = c.tu_days;
    j["r0_du"] = {c.r0_du(0), c.r0_du(1), c.r0_du(2)};
    j["v0_vu"] = {c.v0_vu(0), c.v0_vu(1), c.v0_vu(2)};
    j["rf_du"] = {c.rf_du(0), c.rf_du(1), c.rf_du(2)};
    j["vf_vu"] = {c.vf_vu(0), c.vf_vu(1), c.vf_vu(2)};
    j["duration_days"] = c.duration_days;
    j["node_count"] = c.node_count;
    j["p0_matrix"] = matrix_to_json(c.p0);
    j["pf_matrix"] = matrix_to_json(c.pf);
    j["rho_u_kms"] = c.rho_u_kms;
    j["beta"] = c.beta;
    j["gamma"] = c.gamma;
    j["f_w"] = matrix_to_json(c.f_w);
    j["q_psd"] = matrix_to_json(c.q_psd);
    j["f_u"] = matrix_to_json(c.f_u);
    j["exec_cov_vu2"] = matrix_to_json(c.exec_cov);
    j["split"] = {{"library", c.split_library_size}, {"lambda", c.split_lambda}, {"dims", c.split_dims}};
    j["mc"] = {{"samples", c.mc.samples},
               {"seed", c.mc.seed},
               {"process_noise", c.mc.process_noise},
               {"execution_error", c.mc.execution_error}};
    j["solver"] = {{"algorithm", c.solver.algorithm},
                   {"max_iterations", c.solver.max_iterations},
                   {"tol_feasibility", c.solver.tol_feasibility},
                   {"tol_stationarity", c.solver.tol_stationarity},
                   {"fd_step", c.solver.fd_step},
                   {"step_cap", c.solver.step_cap},
                   {"gain_bound_enabled", c.solver.gain_bound_enabled},
                   {"gain_bound", c.solver.gain_bound},
                   {"threads", c.solver.threads}};
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write scenario file " + path);
    out << j.dump(2) << "\n";
}

}  // namespace gmsteer
