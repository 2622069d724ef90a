#include "gmsteer/sqp.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "gmsteer/qp.hpp"

namespace gmsteer {

namespace {

double l1_violation(const VecX& c_eq, const VecX& c_in) {
    return c_eq.cwiseAbs().sum() + c_in.cwiseMax(0.0).sum();
}

double max_violation(const VecX& c_eq, const VecX& c_in) {
    const double eq = c_eq.size() ? c_eq.cwiseAbs().maxCoeff() : 0.0;
    const double in = c_in.size() ? std::max(0.0, c_in.maxCoeff()) : 0.0;
    return std::max(eq, in);
}

void log_line(std::ostream* log, int iter, double cost, double viol, double step) {
    if (!log) return;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d %.10e %.6e %.6e\n", iter, cost, viol, step);
    (*log) << buf;
    log->flush();
}

// Appends gain box-bound rows (|z_i| <= bound over the gain block) to the
// scaled inequality set. These rows are linear, so their Jacobian is exact.
struct BoundAugmenter {
    bool enabled = false;
    double bound = 0.0;
    int gain_offset = 0;  // first gain index in z
    int n = 0;

    int rows() const { return enabled ? 2 * (n - gain_offset) : 0; }

    VecX augment(const VecX& c_in, const VecX& z) const {
        if (!enabled) return c_in;
        const int m = static_cast<int>(c_in.size());
        const int nb = n - gain_offset;
        VecX out(m + 2 * nb);
        out.head(m) = c_in;
        for (int i = 0; i < nb; ++i) {
            out(m + 2 * i) = z(gain_offset + i) - bound;
            out(m + 2 * i + 1) = -z(gain_offset + i) - bound;
        }
        return out;
    }

    MatX augment_jacobian(const MatX& j_in) const {
        if (!enabled) return j_in;
        const int m = static_cast<int>(j_in.rows());
        const int nb = n - gain_offset;
        MatX out = MatX::Zero(m + 2 * nb, n);
        out.topRows(m) = j_in;
        for (int i = 0; i < nb; ++i) {
            out(m + 2 * i, gain_offset + i) = 1.0;
            out(m + 2 * i + 1, gain_offset + i) = -1.0;
        }
        return out;
    }
};

// Powell-damped BFGS update keeping B positive definite.
void damped_bfgs_update(MatX& b, const VecX& s, const VecX& y) {
    const VecX bs = b * s;
    const double sbs = s.dot(bs);
    if (!(sbs > 1e-16)) return;
    double sy = s.dot(y);
    VecX yd = y;
    if (sy < 0.2 * sbs) {
        const double theta = 0.8 * sbs / (sbs - sy);
        yd = theta * y + (1.0 - theta) * bs;
        sy = s.dot(yd);
    }
    if (!(sy > 1e-14 * s.norm() * yd.norm())) return;
    b += (yd * yd.transpose()) / sy - (bs * bs.transpose()) / sbs;
}

struct QpSolution {
    bool ok = false;
    VecX p;
    VecX y;  // equality multipliers
    VecX z;  // inequality multipliers, >= 0
};

QpSolution solve_subproblem(const MatX& b, const VecX& grad, const MatX& j_eq, const VecX& c_eq,
                            const MatX& j_in, const VecX& c_in, double elastic_penalty) {
    const int n = static_cast<int>(grad.size());
    const int m_in = static_cast<int>(c_in.size());

    QpSolution sol;
    QpResult qp = solve_qp(b, grad, j_eq, c_eq, j_in, c_in);
    if (qp.status == QpStatus::optimal) {
        sol.ok = true;
        sol.p = qp.x;
        sol.y = qp.eq_multipliers;
        sol.z = qp.ineq_multipliers;
        return sol;
    }

    // Elastic reformulation: slacks on the inequalities with an L1 charge keep
    // the subproblem feasible when the plain linearization is not.
    const int ne = n + m_in;
    MatX h = MatX::Zero(ne, ne);
    h.topLeftCorner(n, n) = b;
    h.bottomRightCorner(m_in, m_in) = 1e-6 * MatX::Identity(m_in, m_in);
    VecX g = VecX::Zero(ne);
    g.head(n) = grad;
    g.tail(m_in).setConstant(elastic_penalty);

    MatX a_eq = MatX::Zero(j_eq.rows(), ne);
    a_eq.leftCols(n) = j_eq;
    MatX a_in = MatX::Zero(2 * m_in, ne);
    VecX b_in = VecX::Zero(2 * m_in);
    a_in.topLeftCorner(m_in, n) = j_in;
    a_in.topRightCorner(m_in, m_in) = -MatX::Identity(m_in, m_in);
    b_in.head(m_in) = c_in;
    a_in.bottomRightCorner(m_in, m_in) = -MatX::Identity(m_in, m_in);

    QpResult eqp = solve_qp(h, g, a_eq, c_eq, a_in, b_in);
    if (eqp.status != QpStatus::optimal) return sol;
    sol.ok = true;
    sol.p = eqp.x.head(n);
    sol.y = eqp.eq_multipliers;
    sol.z = eqp.ineq_multipliers.head(m_in);
    return sol;
}

SolveResult solve_auglag(NlpProblem& problem, const ControlPolicy& guess,
                         const SolverConfig& config, std::ostream* log);

}  // namespace

const char* to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::iteration_limit: return "iteration-limit";
        case SolveStatus::infeasible: return "infeasible";
    }
    return "unknown";
}

SolveResult solve(NlpProblem& problem, const ControlPolicy& guess, const SolverConfig& config,
                  std::ostream* log) {
    if (config.algorithm == "auglag") return solve_auglag(problem, guess, config, log);
    if (config.algorithm != "sqp") {
        throw ConfigError("solver.algorithm must be 'sqp' or 'auglag', got '" + config.algorithm + "'");
    }

    const auto t_start = std::chrono::steady_clock::now();
    problem.reset_instrumentation();

    const int n = problem.dimension();
    BoundAugmenter bounds;
    bounds.enabled = config.gain_bound_enabled;
    bounds.bound = config.gain_bound;
    bounds.gain_offset = 3 * problem.nodes();
    bounds.n = n;

    VecX x = problem.pack(guess);
    NlpEval eval = problem.evaluate(x);

    // Initial Hessian: exact objective curvature on the v block, unit on gains.
    MatX b = MatX::Identity(n, n);
    b.topLeftCorner(3 * problem.nodes(), 3 * problem.nodes()) *= 2.0;

    double rho = 1.0;
    int stalls = 0;
    SolveReport report;
    report.final_cost = eval.cost;

    MatX j_eq, j_in_raw;
    bool have_pending = false;
    VecX pending_s, pending_grad_l;  // gradient of the Lagrangian at the previous point
    VecX y_mult, z_mult;

    int iter = 0;
    for (iter = 1; iter <= config.max_iterations; ++iter) {
        problem.jacobian(x, eval, j_eq, j_in_raw, config.fd_step);
        const MatX j_in = bounds.augment_jacobian(j_in_raw);
        const VecX c_in = bounds.augment(eval.c_in, x);

        if (have_pending) {
            // Lagrangian gradient difference with multipliers held fixed.
            VecX grad_l = eval.cost_grad + j_eq.transpose() * y_mult + j_in.transpose() * z_mult;
            damped_bfgs_update(b, pending_s, grad_l - pending_grad_l);
            have_pending = false;
        }

        QpSolution qp = solve_subproblem(b, eval.cost_grad, j_eq, eval.c_eq, j_in, c_in,
                                         10.0 * (rho + 1.0));
        if (!qp.ok) {
            // Subgradient descent on the merit as a last resort.
            VecX sub = eval.cost_grad;
            for (int i = 0; i < eval.c_eq.size(); ++i) {
                sub += rho * (eval.c_eq(i) > 0 ? 1.0 : -1.0) * j_eq.row(i).transpose();
            }
            for (int i = 0; i < c_in.size(); ++i) {
                if (c_in(i) > 0) sub += rho * j_in.row(i).transpose();
            }
            qp.p = -sub;
            qp.y = VecX::Zero(eval.c_eq.size());
            qp.z = VecX::Zero(c_in.size());
        }
        y_mult = qp.y;
        z_mult = qp.z;

        // Convergence at the current iterate.
        const VecX grad_l = eval.cost_grad + j_eq.transpose() * y_mult + j_in.transpose() * z_mult;
        const double stationarity = grad_l.cwiseAbs().maxCoeff();
        const double eq_viol = eval.c_eq.cwiseAbs().maxCoeff();
        const double in_viol = c_in.size() ? std::max(0.0, c_in.maxCoeff()) : 0.0;
        report.stationarity = stationarity;
        report.max_equality_violation = eq_viol;
        report.max_inequality_violation = in_viol;
        report.final_cost = eval.cost;

        const double step_norm = qp.p.size() ? qp.p.cwiseAbs().maxCoeff() : 0.0;
        if (eq_viol <= config.tol_feasibility && in_viol <= config.tol_feasibility &&
            (stationarity <= config.tol_stationarity || step_norm <= 1e-10)) {
            report.status = SolveStatus::converged;
            log_line(log, iter, eval.cost, max_violation(eval.c_eq, c_in), 0.0);
            break;
        }

        VecX p = qp.p;
        if (step_norm > config.step_cap) p *= config.step_cap / step_norm;

        // L1 penalty must dominate the multipliers for the merit to be exact.
        double mult_inf = 0.0;
        if (y_mult.size()) mult_inf = std::max(mult_inf, y_mult.cwiseAbs().maxCoeff());
        if (z_mult.size()) mult_inf = std::max(mult_inf, z_mult.cwiseAbs().maxCoeff());
        rho = std::max(rho, 1.5 * mult_inf + 0.1);

        const double viol0 = l1_violation(eval.c_eq, c_in);
        const double merit0 = eval.cost + rho * viol0;
        const double dderiv = eval.cost_grad.dot(p) - rho * viol0;

        double alpha = 1.0;
        bool accepted = false;
        NlpEval eval_new;
        VecX x_new;
        for (int ls = 0; ls < 24; ++ls) {
            x_new = x + alpha * p;
            bool evaluated = false;
            try {
                eval_new = problem.evaluate(x_new);
                evaluated = true;
            } catch (const IntegrationError&) {
                evaluated = false;  // unreachable trial point; shrink the step
            }
            if (evaluated) {
                const double merit =
                    eval_new.cost + rho * l1_violation(eval_new.c_eq, bounds.augment(eval_new.c_in, x_new));
                if (merit <= merit0 + 1e-4 * alpha * std::min(dderiv, 0.0)) {
                    accepted = true;
                    break;
                }
                // Second-order correction against curvature-induced rejection.
                if (ls == 0 && eval.c_eq.size() > 0) {
                    const MatX jjt = j_eq * j_eq.transpose();
                    Eigen::LDLT<MatX> ldlt(jjt);
                    if (ldlt.info() == Eigen::Success) {
                        const VecX d = -j_eq.transpose() * ldlt.solve(eval_new.c_eq);
                        try {
                            NlpEval eval_soc = problem.evaluate(x + p + d);
                            const double merit_soc =
                                eval_soc.cost +
                                rho * l1_violation(eval_soc.c_eq, bounds.augment(eval_soc.c_in, x + p + d));
                            if (merit_soc <= merit0 + 1e-4 * std::min(dderiv, 0.0)) {
                                x_new = x + p + d;
                                eval_new = std::move(eval_soc);
                                accepted = true;
                                break;
                            }
                        } catch (const IntegrationError&) {
                        }
                    }
                }
            }
            alpha *= 0.5;
        }

        if (!accepted) {
            ++stalls;
            rho *= 10.0;
            log_line(log, iter, eval.cost, max_violation(eval.c_eq, c_in), 0.0);
            if (stalls >= 3) {
                report.status = (max_violation(eval.c_eq, c_in) > 1e2 * config.tol_feasibility)
                                    ? SolveStatus::infeasible
                                    : SolveStatus::iteration_limit;
                break;
            }
            continue;
        }
        stalls = 0;

        pending_s = x_new - x;
        pending_grad_l = eval.cost_grad + j_eq.transpose() * y_mult + j_in.transpose() * z_mult;
        have_pending = true;

        x = std::move(x_new);
        eval = std::move(eval_new);
        log_line(log, iter, eval.cost,
                 max_violation(eval.c_eq, bounds.augment(eval.c_in, x)), alpha);
    }

    report.iterations = std::min(iter, config.max_iterations);
    if (report.status != SolveStatus::converged && report.status != SolveStatus::infeasible) {
        report.status = SolveStatus::iteration_limit;
    }

    SolveResult out;
    out.policy = problem.unpack(x);
    NlpEval final_eval = problem.evaluate(x);
    out.policy.ref_means.assign(final_eval.trajectory.mean_minus.begin(),
                                final_eval.trajectory.mean_minus.end());
    out.trajectory = std::move(final_eval.trajectory);
    report.final_cost = final_eval.cost;
    report.max_equality_violation = final_eval.c_eq.cwiseAbs().maxCoeff();
    report.max_inequality_violation =
        final_eval.c_in.size() ? std::max(0.0, final_eval.c_in.maxCoeff()) : 0.0;
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    report.segment_propagations = problem.segment_propagations();
    out.report = report;
    return out;
}

namespace {

SolveResult solve_auglag(NlpProblem& problem, const ControlPolicy& guess,
                         const SolverConfig& config, std::ostream* log) {
    const auto t_start = std::chrono::steady_clock::now();
    problem.reset_instrumentation();

    const int n = problem.dimension();
    VecX x = problem.pack(guess);
    NlpEval eval = problem.evaluate(x);

    VecX lam_eq = VecX::Zero(problem.num_eq());
    VecX lam_in = VecX::Zero(problem.num_in());
    double mu = 10.0;

    MatX j_eq, j_in;
    SolveReport report;
    int total_inner = 0;
    double prev_viol = max_violation(eval.c_eq, eval.c_in);

    auto auglag_value = [&](const NlpEval& e) {
        double m = e.cost + lam_eq.dot(e.c_eq) + 0.5 * mu * e.c_eq.squaredNorm();
        for (int i = 0; i < e.c_in.size(); ++i) {
            const double t = lam_in(i) + mu * e.c_in(i);
            m += (t > 0.0 ? (t * t - lam_in(i) * lam_in(i)) : -lam_in(i) * lam_in(i)) / (2.0 * mu);
        }
        return m;
    };

    for (int outer = 0; outer < 40 && total_inner < config.max_iterations; ++outer) {
        // Inner minimization of the augmented Lagrangian with BFGS.
        MatX h_inv = MatX::Identity(n, n);
        VecX g_prev, x_prev;
        for (int inner = 0; inner < 25 && total_inner < config.max_iterations; ++inner, ++total_inner) {
            problem.jacobian(x, eval, j_eq, j_in, config.fd_step);
            VecX g = eval.cost_grad + j_eq.transpose() * (lam_eq + mu * eval.c_eq);
            for (int i = 0; i < eval.c_in.size(); ++i) {
                const double t = lam_in(i) + mu * eval.c_in(i);
                if (t > 0.0) g += t * j_in.row(i).transpose();
            }
            if (g_prev.size()) {
                const VecX s = x - x_prev;
                const VecX yv = g - g_prev;
                const double sy = s.dot(yv);
                if (sy > 1e-12) {
                    const VecX hy = h_inv * yv;
                    h_inv += ((sy + yv.dot(hy)) / (sy * sy)) * (s * s.transpose()) -
                             (hy * s.transpose() + s * hy.transpose()) / sy;
                }
            }
            if (g.cwiseAbs().maxCoeff() < std::max(1e-8, 0.02 / mu)) break;

            VecX p = -(h_inv * g);
            const double pn = p.cwiseAbs().maxCoeff();
            if (pn > config.step_cap) p *= config.step_cap / pn;
            const double m0 = auglag_value(eval);
            const double dd = g.dot(p);
            double alpha = 1.0;
            bool ok = false;
            NlpEval cand;
            for (int ls = 0; ls < 30; ++ls) {
                try {
                    cand = problem.evaluate(x + alpha * p);
                    if (auglag_value(cand) <= m0 + 1e-4 * alpha * std::min(dd, 0.0)) {
                        ok = true;
                        break;
                    }
                } catch (const IntegrationError&) {
                }
                alpha *= 0.5;
            }
            if (!ok) break;
            g_prev = g;
            x_prev = x;
            x += alpha * p;
            eval = std::move(cand);
            log_line(log, total_inner + 1, eval.cost, max_violation(eval.c_eq, eval.c_in), alpha);
        }

        lam_eq += mu * eval.c_eq;
        for (int i = 0; i < eval.c_in.size(); ++i) {
            lam_in(i) = std::max(0.0, lam_in(i) + mu * eval.c_in(i));
        }
        const double viol = max_violation(eval.c_eq, eval.c_in);
        if (viol <= config.tol_feasibility) {
            report.status = SolveStatus::converged;
            break;
        }
        if (viol > 0.25 * prev_viol) mu *= 5.0;
        prev_viol = viol;
    }

    report.iterations = total_inner;
    SolveResult out;
    out.policy = problem.unpack(x);
    NlpEval final_eval = problem.evaluate(x);
    out.policy.ref_means.assign(final_eval.trajectory.mean_minus.begin(),
                                final_eval.trajectory.mean_minus.end());
    out.trajectory = std::move(final_eval.trajectory);
    report.final_cost = final_eval.cost;
    report.max_equality_violation = final_eval.c_eq.cwiseAbs().maxCoeff();
    report.max_inequality_violation =
        final_eval.c_in.size() ? std::max(0.0, final_eval.c_in.maxCoeff()) : 0.0;
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    report.segment_propagations = problem.segment_propagations();
    if (report.status != SolveStatus::converged &&
        report.max_equality_violation + report.max_inequality_violation >
            1e2 * config.tol_feasibility &&
        total_inner >= config.max_iterations) {
        report.status = SolveStatus::iteration_limit;
    }
    out.report = report;
    return out;
}

}  // namespace

}  // namespace gmsteer
