#include "gmsteer/qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace gmsteer {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rotates d into the first q+1 slots and updates J accordingly; appends the
// result as column q of R (then increments q). Returns false when the new
// normal is linearly dependent on the active set.
bool add_constraint(MatX& r, MatX& j, VecX& d, int& q, double r_norm) {
    const int n = static_cast<int>(j.rows());
    for (int k = n - 1; k >= q + 1; --k) {
        double cc = d(k - 1);
        double ss = d(k);
        const double h = std::hypot(cc, ss);
        if (h == 0.0) continue;
        d(k) = 0.0;
        ss /= h;
        cc /= h;
        if (cc < 0.0) {
            cc = -cc;
            ss = -ss;
            d(k - 1) = -h;
        } else {
            d(k - 1) = h;
        }
        const double xny = ss / (1.0 + cc);
        for (int row = 0; row < n; ++row) {
            const double t1 = j(row, k - 1);
            const double t2 = j(row, k);
            j(row, k - 1) = t1 * cc + t2 * ss;
            j(row, k) = xny * (t1 + j(row, k - 1)) - t2;
        }
    }
    ++q;
    r.col(q - 1).head(q) = d.head(q);
    r.col(q - 1).tail(n - q).setZero();
    return std::abs(d(q - 1)) > 1e-13 * r_norm;
}

// Undoes a just-added dependent column (rotations already applied to J stay
// valid; only the R column and the slot bookkeeping are rolled back).
void rollback_add(MatX& r, std::vector<int>& active, VecX& u, int& q) {
    --q;
    r.col(q).setZero();
    active[q] = -1;
    u(q) = 0.0;
}

// Removes active constraint slot `slot` (>= meq) and restores the triangular
// structure of R.
void delete_constraint(MatX& r, MatX& j, std::vector<int>& active, VecX& u, int& q, int slot) {
    const int n = static_cast<int>(j.rows());
    for (int i = slot; i < q - 1; ++i) {
        active[i] = active[i + 1];
        u(i) = u(i + 1);
        r.col(i) = r.col(i + 1);
    }
    active[q - 1] = -1;
    u(q - 1) = 0.0;
    r.col(q - 1).setZero();
    --q;
    for (int jj = slot; jj < q; ++jj) {
        double cc = r(jj, jj);
        double ss = r(jj + 1, jj);
        const double h = std::hypot(cc, ss);
        if (h == 0.0) continue;
        cc /= h;
        ss /= h;
        r(jj + 1, jj) = 0.0;
        if (cc < 0.0) {
            r(jj, jj) = -h;
            cc = -cc;
            ss = -ss;
        } else {
            r(jj, jj) = h;
        }
        const double xny = ss / (1.0 + cc);
        for (int k = jj + 1; k < q; ++k) {
            const double t1 = r(jj, k);
            const double t2 = r(jj + 1, k);
            r(jj, k) = t1 * cc + t2 * ss;
            r(jj + 1, k) = xny * (t1 + r(jj, k)) - t2;
        }
        for (int k = 0; k < n; ++k) {
            const double t1 = j(k, jj);
            const double t2 = j(k, jj + 1);
            j(k, jj) = t1 * cc + t2 * ss;
            j(k, jj + 1) = xny * (t1 + j(k, jj)) - t2;
        }
    }
}

}  // namespace

QpResult solve_qp(const MatX& h, const VecX& g, const MatX& a_eq, const VecX& b_eq,
                  const MatX& a_in, const VecX& b_in) {
    const int n = static_cast<int>(g.size());
    const int meq = static_cast<int>(b_eq.size());
    const int min = static_cast<int>(b_in.size());

    QpResult out;
    out.eq_multipliers = VecX::Zero(meq);
    out.ineq_multipliers = VecX::Zero(min);

    Eigen::LLT<MatX> llt;
    MatX hh = h;
    double jitter = 0.0;
    for (int attempt = 0;; ++attempt) {
        llt.compute(hh);
        if (llt.info() == Eigen::Success) break;
        if (attempt >= 8) return out;  // failed
        jitter = (jitter == 0.0) ? 1e-12 * (1.0 + h.diagonal().cwiseAbs().maxCoeff()) : jitter * 100.0;
        hh = h + jitter * MatX::Identity(n, n);
    }

    // J = L^{-T}; x = unconstrained minimizer.
    MatX j = llt.matrixL().toDenseMatrix().triangularView<Eigen::Lower>()
                 .solve(MatX::Identity(n, n)).transpose();
    VecX x = -llt.solve(g);

    MatX r = MatX::Zero(n, n);
    double r_norm = 1.0;
    std::vector<int> active(n, -1);  // equality slots hold -(row+1); inequality slots hold row
    VecX u = VecX::Zero(n + 1);
    int q = 0;

    VecX d(n), z(n), rr(n), np(n);

    auto compute_steps = [&]() {
        d.noalias() = j.transpose() * np;
        z.setZero();
        if (q < n) z.noalias() = j.rightCols(n - q) * d.tail(n - q);
        rr.setZero();
        if (q > 0) {
            rr.head(q) = r.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));
        }
    };

    // Install equality constraints.
    for (int i = 0; i < meq; ++i) {
        np = a_eq.row(i).transpose();
        compute_steps();
        const double resid = np.dot(x) + b_eq(i);
        const double ztnp = z.dot(np);
        const double z2 = (q < n) ? d.tail(n - q).squaredNorm() : 0.0;
        double t2 = 0.0;
        if (z2 > 1e-26 * std::max(1.0, d.squaredNorm())) {
            t2 = -resid / ztnp;
        } else if (std::abs(resid) > 1e-9 * (1.0 + std::abs(b_eq(i)))) {
            out.status = QpStatus::infeasible;  // inconsistent equality system
            return out;
        }
        x += t2 * z;
        u.head(q) -= t2 * rr.head(q);
        u(q) = t2;
        active[q] = -(i + 1);
        if (!add_constraint(r, j, d, q, r_norm)) {
            rollback_add(r, active, u, q);  // redundant equality, already satisfied
        }
        r_norm = std::max(r_norm, q > 0 ? r.topLeftCorner(q, q).cwiseAbs().maxCoeff() : 1.0);
    }

    const double feas_tol = 1e-10 * (1.0 + (min > 0 ? b_in.cwiseAbs().maxCoeff() : 0.0));
    const int max_iter = 100 + 30 * (meq + min);
    int iter = 0;

    while (true) {
        if (++iter > max_iter) {
            out.status = QpStatus::failed;
            return out;
        }
        // Most violated inequality (a_in x + b_in <= 0 wanted).
        int ip = -1;
        double worst = feas_tol;
        for (int i = 0; i < min; ++i) {
            const double s = a_in.row(i).dot(x) + b_in(i);
            if (s > worst) {
                worst = s;
                ip = i;
            }
        }
        if (ip < 0) break;  // feasible -> optimal

        np = -a_in.row(ip).transpose();  // inward normal
        double u_plus = 0.0;

        while (true) {
            if (++iter > max_iter) {
                out.status = QpStatus::failed;
                return out;
            }
            compute_steps();

            // Dual step bound over active inequalities.
            double t1 = kInf;
            int drop_slot = -1;
            for (int k = meq; k < q; ++k) {
                if (rr(k) > 1e-14) {
                    const double bound = u(k) / rr(k);
                    if (bound < t1) {
                        t1 = bound;
                        drop_slot = k;
                    }
                }
            }
            // Primal step length to make constraint ip feasible.
            const double viol = a_in.row(ip).dot(x) + b_in(ip);
            if (viol <= 0.0) break;  // closed by earlier partial steps
            const double ztnp = z.dot(np);
            const double z2 = (q < n) ? d.tail(n - q).squaredNorm() : 0.0;
            const bool z_zero = !(z2 > 1e-26 * std::max(1.0, d.squaredNorm()));
            const double t2 = z_zero ? kInf : viol / ztnp;

            const double t = std::min(t1, t2);
            if (t >= kInf) {
                out.status = QpStatus::infeasible;
                return out;
            }

            if (t2 >= kInf) {
                // Dual-only step: drop the blocking constraint and retry.
                u.head(q) -= t * rr.head(q);
                u_plus += t;
                delete_constraint(r, j, active, u, q, drop_slot);
                continue;
            }

            x += t * z;
            u.head(q) -= t * rr.head(q);
            u_plus += t;

            if (t == t2) {
                // Full step: activate constraint ip.
                u(q) = u_plus;
                active[q] = ip;
                if (!add_constraint(r, j, d, q, r_norm)) {
                    rollback_add(r, active, u, q);
                    if (std::abs(a_in.row(ip).dot(x) + b_in(ip)) >
                        1e-7 * (1.0 + std::abs(b_in(ip)))) {
                        out.status = QpStatus::failed;
                        return out;
                    }
                }
                r_norm = std::max(r_norm, q > 0 ? r.topLeftCorner(q, q).cwiseAbs().maxCoeff() : 1.0);
                break;
            }
            // Partial step: drop the blocker, keep pushing the same constraint.
            delete_constraint(r, j, active, u, q, drop_slot);
        }
    }

    out.status = QpStatus::optimal;
    out.x = x;
    for (int k = 0; k < q; ++k) {
        if (active[k] < 0) {
            out.eq_multipliers(-active[k] - 1) = -u(k);
        } else {
            out.ineq_multipliers(active[k]) = u(k);
        }
    }
    out.iterations = iter;
    return out;
}

}  // namespace gmsteer
