/**
 * @file integrate.hpp
 * @brief Adaptive Dormand-Prince 5(4) integrator over fixed-size states.
 */

#ifndef GMSTEER_INTEGRATE_HPP
#define GMSTEER_INTEGRATE_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gmsteer {

class IntegrationError : public std::runtime_error {
public:
    explicit IntegrationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Rk45Options {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    double initial_step = 0.0;  // 0 -> heuristic from the interval length
    long max_steps = 2000000;
};

struct Rk45Stats {
    long steps_taken = 0;
    double max_error_estimate = 0.0;  // scaled error of the worst accepted step
};

/// Integrates y' = rhs(t, y) from t0 to t1 (either direction) in place.
/// Throws IntegrationError on step underflow or step-budget exhaustion.
template <int N, class Rhs>
Rk45Stats rk45_integrate(Rhs&& rhs, Eigen::Matrix<double, N, 1>& y, double t0, double t1,
                         const Rk45Options& opt = {}) {
    using Vec = Eigen::Matrix<double, N, 1>;

    if (t1 == t0) return {};
    const double dir = (t1 > t0) ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);

    Vec k1, k2, k3, k4, k5, k6, k7, ynew, yerr, ytmp;
    double t = t0;
    double h = (opt.initial_step > 0.0 ? std::min(opt.initial_step, span) : span / 100.0) * dir;

    rhs(t, y, k1);
    Rk45Stats stats;

    for (long step = 0; step < opt.max_steps; ++step) {
        bool last = false;
        if (std::abs(h) >= std::abs(t1 - t)) {
            h = t1 - t;
            last = true;
        }
        if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t))) {
            throw IntegrationError("rk45: step size underflow at t = " + std::to_string(t));
        }

        ytmp = y + h * (1.0 / 5.0) * k1;
        rhs(t + h * (1.0 / 5.0), ytmp, k2);
        ytmp = y + h * ((3.0 / 40.0) * k1 + (9.0 / 40.0) * k2);
        rhs(t + h * (3.0 / 10.0), ytmp, k3);
        ytmp = y + h * ((44.0 / 45.0) * k1 - (56.0 / 15.0) * k2 + (32.0 / 9.0) * k3);
        rhs(t + h * (4.0 / 5.0), ytmp, k4);
        ytmp = y + h * ((19372.0 / 6561.0) * k1 - (25360.0 / 2187.0) * k2 +
                        (64448.0 / 6561.0) * k3 - (212.0 / 729.0) * k4);
        rhs(t + h * (8.0 / 9.0), ytmp, k5);
        ytmp = y + h * ((9017.0 / 3168.0) * k1 - (355.0 / 33.0) * k2 + (46732.0 / 5247.0) * k3 +
                        (49.0 / 176.0) * k4 - (5103.0 / 18656.0) * k5);
        rhs(t + h, ytmp, k6);
        ynew = y + h * ((35.0 / 384.0) * k1 + (500.0 / 1113.0) * k3 + (125.0 / 192.0) * k4 -
                        (2187.0 / 6784.0) * k5 + (11.0 / 84.0) * k6);
        rhs(t + h, ynew, k7);
        yerr = h * ((71.0 / 57600.0) * k1 - (71.0 / 16695.0) * k3 + (71.0 / 1920.0) * k4 -
                    (17253.0 / 339200.0) * k5 + (22.0 / 525.0) * k6 - (1.0 / 40.0) * k7);

        double err = 0.0;
        for (int i = 0; i < y.size(); ++i) {
            const double tol = opt.abs_tol + opt.rel_tol * std::max(std::abs(y(i)), std::abs(ynew(i)));
            const double e = yerr(i) / tol;
            err += e * e;
        }
        err = std::sqrt(err / static_cast<double>(y.size()));

        if (err <= 1.0) {
            t = last ? t1 : t + h;
            y = ynew;
            k1 = k7;  // FSAL
            ++stats.steps_taken;
            stats.max_error_estimate = std::max(stats.max_error_estimate, err);
            if (last) return stats;
        }
        const double factor = (err <= 1e-30) ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        h *= factor;
    }
    throw IntegrationError("rk45: step budget exhausted before reaching t1");
}

}  // namespace gmsteer

#endif
