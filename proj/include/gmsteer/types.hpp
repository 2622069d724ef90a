/**
 * @file types.hpp
 * @brief Core uncertainty types: Gaussian and GaussianMixture.
 */

#ifndef GMSTEER_TYPES_HPP
#define GMSTEER_TYPES_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gmsteer {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat36 = Eigen::Matrix<double, 3, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Tolerances on covariance validity used throughout.
constexpr double kSymmetryTol = 1e-12;
constexpr double kPsdRelTol = 1e-10;

/// Error for invalid numerical inputs (indefinite covariances, bad weights, ...).
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Multivariate normal distribution: mean and covariance.
struct Gaussian {
    VecX mean;
    MatX cov;

    Gaussian() = default;
    Gaussian(VecX m, MatX P) : mean(std::move(m)), cov(std::move(P)) {}

    int dim() const { return static_cast<int>(mean.size()); }

    /// Enforces symmetry (averaging) and verifies PSD-ness within tolerance.
    void validate(const std::string& context = "Gaussian") const;
};

/// Symmetrize in place as (A + A^T)/2.
inline void symmetrize(MatX& a) { a = ((a + a.transpose()) * 0.5).eval(); }
inline void symmetrize(Mat6& a) { a = ((a + a.transpose()) * 0.5).eval(); }
inline void symmetrize(Mat3& a) { a = ((a + a.transpose()) * 0.5).eval(); }

struct WeightedGaussian {
    double weight = 1.0;
    Gaussian gaussian;
};

/// Weighted sum of Gaussians with a shared dimension. Weights sum to one.
struct GaussianMixture {
    std::vector<WeightedGaussian> components;

    GaussianMixture() = default;
    explicit GaussianMixture(const Gaussian& g) { components.push_back({1.0, g}); }

    int size() const { return static_cast<int>(components.size()); }
    int dim() const { return components.empty() ? 0 : components.front().gaussian.dim(); }

    double total_weight() const;

    /// Checks weight normalization, shared dimension, and per-component validity.
    void validate(const std::string& context = "GaussianMixture") const;
};

}  // namespace gmsteer

#endif
