#include "gmsteer/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gmsteer/dynamics.hpp"
#include "gmsteer/gm_ops.hpp"

namespace gmsteer {

using nlohmann::json;

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot open output file " + path);
    return out;
}

const char* cov_units(int row, int col) {
    const bool r_pos = row < 3;
    const bool c_pos = col < 3;
    if (r_pos && c_pos) return "du2";
    if (!r_pos && !c_pos) return "vu2";
    return "du_vu";
}

}  // namespace

void save_policy(const std::string& path, const ControlPolicy& policy) {
    policy.validate();
    std::ofstream out = open_out(path);
    out << "gmsteer-policy 1\n";
    out << "nodes " << policy.size() << "\n";
    for (int k = 0; k < policy.size(); ++k) {
        out << "v " << k << "\n";
        out << format_number(policy.v[k](0)) << " " << format_number(policy.v[k](1)) << " "
            << format_number(policy.v[k](2)) << "\n";
        out << "G " << k << "\n";
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 6; ++c) {
                out << format_number(policy.gains[k](r, c)) << (c == 5 ? "\n" : " ");
            }
        }
        out << "ref_mean " << k << "\n";
        for (int c = 0; c < 6; ++c) {
            out << format_number(policy.ref_means[k](c)) << (c == 5 ? "\n" : " ");
        }
    }
}

ControlPolicy load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open policy file " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "gmsteer-policy" || version != 1) {
        throw DomainError("policy file " + path + ": unrecognized header");
    }
    std::string key;
    int nodes = 0;
    in >> key >> nodes;
    if (key != "nodes" || nodes < 1) throw DomainError("policy file " + path + ": bad node count");

    ControlPolicy policy = ControlPolicy::zero(nodes);
    for (int k = 0; k < nodes; ++k) {
        int idx = -1;
        in >> key >> idx;
        if (key != "v" || idx != k) throw DomainError("policy file " + path + ": expected v block " + std::to_string(k));
        for (int c = 0; c < 3; ++c) in >> policy.v[k](c);
        in >> key >> idx;
        if (key != "G" || idx != k) throw DomainError("policy file " + path + ": expected G block " + std::to_string(k));
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 6; ++c) in >> policy.gains[k](r, c);
        in >> key >> idx;
        if (key != "ref_mean" || idx != k) throw DomainError("policy file " + path + ": expected ref_mean block " + std::to_string(k));
        for (int c = 0; c < 6; ++c) in >> policy.ref_means[k](c);
        if (!in) throw DomainError("policy file " + path + ": truncated at node " + std::to_string(k));
    }
    return policy;
}

void write_solve_report(const std::string& path, const SolveReport& report) {
    json j;
    j["status"] = to_string(report.status);
    j["iterations"] = report.iterations;
    j["final_cost_vu2"] = report.final_cost;
    j["max_equality_violation"] = report.max_equality_violation;
    j["max_inequality_violation"] = report.max_inequality_violation;
    j["stationarity"] = report.stationarity;
    j["segment_propagations"] = report.segment_propagations;
    std::ofstream out = open_out(path);
    out << j.dump(2) << "\n";
}

void write_moment_trajectory(const std::string& out_dir, const MomentTrajectory& traj,
                             const ControlPolicy& policy, const ScenarioConfig& config) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const double vu = config.vu_kms();
    const int nseg = traj.nodes();

    {
        std::ofstream out = open_out(out_dir + "/nodes.csv");
        out << "node,t_tu,x_minus_du,y_minus_du,z_minus_du,vx_minus_vu,vy_minus_vu,vz_minus_vu,"
               "x_plus_du,y_plus_du,z_plus_du,vx_plus_vu,vy_plus_vu,vz_plus_vu\n";
        for (int k = 0; k < nseg; ++k) {
            out << k << "," << format_number(traj.node_times[k]);
            for (int d = 0; d < 6; ++d) out << "," << format_number(traj.mean_minus[k](d));
            for (int d = 0; d < 6; ++d) out << "," << format_number(traj.mean_plus[k](d));
            out << "\n";
        }
        out << nseg << "," << format_number(traj.node_times[nseg]);
        for (int d = 0; d < 6; ++d) out << "," << format_number(traj.terminal_mean(d));
        for (int d = 0; d < 6; ++d) out << "," << format_number(traj.terminal_mean(d));
        out << "\n";
    }

    {
        std::ofstream out = open_out(out_dir + "/covariances.csv");
        out << "node,t_tu,phase,row,col,value,units\n";
        auto emit = [&](int node, double t, const char* phase, const Mat6& p) {
            for (int r = 0; r < 6; ++r)
                for (int c = 0; c < 6; ++c) {
                    out << node << "," << format_number(t) << "," << phase << "," << r << "," << c
                        << "," << format_number(p(r, c)) << "," << cov_units(r, c) << "\n";
                }
        };
        for (int k = 0; k < nseg; ++k) {
            emit(k, traj.node_times[k], "minus", traj.cov_minus[k]);
            emit(k, traj.node_times[k], "plus", traj.cov_plus[k]);
        }
        emit(nseg, traj.node_times[nseg], "terminal", traj.terminal_cov);
    }

    {
        std::ofstream out = open_out(out_dir + "/control_covariances.csv");
        out << "node,t_tu,row,col,value,units\n";
        for (int k = 0; k < nseg; ++k) {
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) {
                    out << k << "," << format_number(traj.node_times[k]) << "," << r << "," << c
                        << "," << format_number(traj.puu[k](r, c)) << ",vu2\n";
                }
        }
    }

    {
        std::ofstream out = open_out(out_dir + "/dv_nominal.csv");
        out << "node,dv_kms,dv_vu\n";
        for (int k = 0; k < policy.size(); ++k) {
            const double mag = policy.v[k].norm();
            out << k << "," << format_number(mag * vu) << "," << format_number(mag) << "\n";
        }
    }

    {
        // Dense mean path for plotting: post-node state integrated across each
        // segment with a fixed sub-grid.
        std::ofstream out = open_out(out_dir + "/trajectory.csv");
        out << "t_tu,x_du,y_du,z_du,vx_vu,vy_vu,vz_vu\n";
        const DynamicsModel dyn = DynamicsModel::two_body(config.mu);
        const int substeps = 16;
        for (int k = 0; k < nseg; ++k) {
            Vec6 x = traj.mean_plus[k];
            const double t0 = traj.node_times[k];
            const double dt = (traj.node_times[k + 1] - t0) / substeps;
            for (int s = 0; s < substeps; ++s) {
                out << format_number(t0 + s * dt);
                for (int d = 0; d < 6; ++d) out << "," << format_number(x(d));
                out << "\n";
                x = propagate_state(x, t0 + s * dt, t0 + (s + 1) * dt, dyn);
            }
        }
        out << format_number(traj.node_times[nseg]);
        for (int d = 0; d < 6; ++d) out << "," << format_number(traj.terminal_mean(d));
        out << "\n";
    }

    {
        // 99.75% interval of the 2D position marginal (chi-square quantile
        // with 2 dof: -2 ln(1 - 0.9975)).
        const double scale = std::sqrt(-2.0 * std::log(1.0 - 0.9975));
        const int npts = 64;
        std::ofstream out = open_out(out_dir + "/ellipses.csv");
        out << "node,point,x_du,y_du\n";
        auto emit = [&](int node, const Vec6& mean, const Mat6& cov) {
            Eigen::Matrix2d pxy = cov.topLeftCorner<2, 2>();
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(pxy);
            const Eigen::Matrix2d root = es.eigenvectors() *
                                         es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
            for (int i = 0; i <= npts; ++i) {
                const double a = 2.0 * M_PI * i / npts;
                const Eigen::Vector2d p =
                    mean.head<2>() + scale * (root * Eigen::Vector2d(std::cos(a), std::sin(a)));
                out << node << "," << i << "," << format_number(p(0)) << "," << format_number(p(1))
                    << "\n";
            }
        };
        for (int k = 0; k < nseg; ++k) emit(k, traj.mean_minus[k], traj.cov_minus[k]);
        emit(nseg, traj.terminal_mean, traj.terminal_cov);
    }
}

void write_mc_results(const std::string& out_dir, const McResult& result,
                      const ScenarioConfig& config, const TerminalSpec& spec) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const double vu = config.vu_kms();

    {
        std::ofstream out = open_out(out_dir + "/terminal_states.csv");
        out << "sample_id,x_du,y_du,z_du,vx_vu,vy_vu,vz_vu\n";
        for (int i = 0; i < result.samples(); ++i) {
            out << i;
            for (int d = 0; d < 6; ++d) out << "," << format_number(result.terminal_states(i, d));
            out << "\n";
        }
    }
    {
        std::ofstream out = open_out(out_dir + "/controls.csv");
        out << "sample_id,node,ux_kms,uy_kms,uz_kms,mag_kms\n";
        for (int i = 0; i < result.samples(); ++i) {
            for (int k = 0; k < result.controls[i].rows(); ++k) {
                const Vec3 u = result.controls[i].row(k).transpose() * vu;
                out << i << "," << k << "," << format_number(u(0)) << "," << format_number(u(1))
                    << "," << format_number(u(2)) << "," << format_number(u.norm()) << "\n";
            }
        }
    }
    {
        const auto gates = gate_percentages(result, spec);
        const auto maha = mahalanobis_stats(result, spec);
        const auto usage = control_usage(result, vu);
        json j;
        j["samples"] = result.samples();
        j["failed_samples"] = result.failed_count;
        j["seed"] = config.mc.seed;
        j["gate_percent"] = {{"x", gates[0]}, {"y", gates[1]}, {"z", gates[2]},
                             {"vx", gates[3]}, {"vy", gates[4]}, {"vz", gates[5]}};
        auto summary_json = [](const MahalanobisStats::Summary& s) {
            return json{{"min", s.min},       {"q1", s.q1},   {"median", s.median},
                        {"q3", s.q3},         {"max", s.max}, {"within_gate_percent", s.within_gate_percent}};
        };
        j["mahalanobis_sq_position"] = summary_json(maha.position);
        j["mahalanobis_sq_velocity"] = summary_json(maha.velocity);
        j["gate_3d_chi2_999"] = kGate3dChi2999;
        j["mean_control_magnitude_kms"] = usage.per_node_mean_kms;
        j["total_mean_dv_kms"] = usage.total_kms;
        j["chance_violation_fraction"] = chance_violation_fraction(result, config.rho_u_vu());
        std::ofstream out = open_out(out_dir + "/summary.json");
        out << j.dump(2) << "\n";
    }
}

}  // namespace gmsteer
