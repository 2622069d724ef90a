#include "gmsteer/types.hpp"

#include <cmath>

namespace gmsteer {

void Gaussian::validate(const std::string& context) const {
    if (mean.size() == 0 || cov.rows() != mean.size() || cov.cols() != mean.size()) {
        throw DomainError(context + ": mean/cov dimension mismatch");
    }
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    const double asym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTol * scale) {
        throw DomainError(context + ": covariance not symmetric (asymmetry " +
                          std::to_string(asym) + ")");
    }
    Eigen::SelfAdjointEigenSolver<MatX> es(cov, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo < -kPsdRelTol * std::max(hi, 1e-300)) {
        throw DomainError(context + ": covariance not positive semidefinite (min eig " +
                          std::to_string(lo) + ")");
    }
}

double GaussianMixture::total_weight() const {
    double w = 0.0;
    for (const auto& c : components) w += c.weight;
    return w;
}

void GaussianMixture::validate(const std::string& context) const {
    if (components.empty()) throw DomainError(context + ": empty mixture");
    const int n = components.front().gaussian.dim();
    for (size_t i = 0; i < components.size(); ++i) {
        const auto& c = components[i];
        if (c.weight <= 0.0 || c.weight > 1.0 + kSymmetryTol) {
            throw DomainError(context + ": weight out of (0,1] at component " + std::to_string(i));
        }
        if (c.gaussian.dim() != n) {
            throw DomainError(context + ": dimension mismatch at component " + std::to_string(i));
        }
        c.gaussian.validate(context + " component " + std::to_string(i));
    }
    if (std::abs(total_weight() - 1.0) > 1e-12 * components.size()) {
        throw DomainError(context + ": weights sum to " + std::to_string(total_weight()));
    }
}

}  // namespace gmsteer
