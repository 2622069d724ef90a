#include "gmsteer/gm_ops.hpp"

#include <algorithm>
#include <cmath>

namespace gmsteer {

MatX covariance_sqrt(const MatX& cov) {
    const double scale = std::max(1e-300, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw DomainError("covariance_sqrt: input not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<MatX> es(cov);
    VecX evals = es.eigenvalues();
    const double hi = evals.maxCoeff();
    if (evals.minCoeff() < -kPsdRelTol * std::max(hi, 1e-300)) {
        throw DomainError("covariance_sqrt: indefinite input (min eig " +
                          std::to_string(evals.minCoeff()) + ")");
    }
    VecX root = evals.cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

GaussianMixture split_gaussian(const Gaussian& g, const std::vector<int>& dims,
                               const SplitLibrary& lib) {
    const int n = g.dim();
    for (size_t i = 0; i < dims.size(); ++i) {
        if (dims[i] < 0 || dims[i] >= n) {
            throw DomainError("split_gaussian: split dimension " + std::to_string(dims[i]) +
                              " out of range for dim " + std::to_string(n));
        }
        for (size_t j = i + 1; j < dims.size(); ++j) {
            if (dims[i] == dims[j]) {
                throw DomainError("split_gaussian: duplicate split dimension " +
                                  std::to_string(dims[i]));
            }
        }
    }
    lib.validate();

    GaussianMixture mix(g);
    const double var_scale = lib.sigma * lib.sigma - 1.0;
    for (int d : dims) {
        GaussianMixture next;
        next.components.reserve(mix.components.size() * lib.count);
        for (const auto& parent : mix.components) {
            const MatX s_xx = covariance_sqrt(parent.gaussian.cov);
            const VecX s = s_xx.col(d);
            const MatX child_cov = parent.gaussian.cov + var_scale * (s * s.transpose());
            for (int l = 0; l < lib.count; ++l) {
                WeightedGaussian child;
                child.weight = parent.weight * lib.weights[l];
                child.gaussian.mean = parent.gaussian.mean + lib.means[l] * s;
                child.gaussian.cov = child_cov;
                symmetrize(child.gaussian.cov);
                next.components.push_back(std::move(child));
            }
        }
        mix = std::move(next);
    }
    return mix;
}

Gaussian collapse(const GaussianMixture& mix) {
    if (mix.components.empty()) throw DomainError("collapse: empty mixture");
    const int n = mix.dim();
    VecX mean = VecX::Zero(n);
    for (const auto& c : mix.components) mean += c.weight * c.gaussian.mean;
    MatX cov = MatX::Zero(n, n);
    for (const auto& c : mix.components) {
        const VecX d = c.gaussian.mean - mean;
        cov += c.weight * (c.gaussian.cov + d * d.transpose());
    }
    symmetrize(cov);
    return {mean, cov};
}

}  // namespace gmsteer
