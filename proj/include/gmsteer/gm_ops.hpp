/**
 * @file gm_ops.hpp
 * @brief Gaussian-mixture operations: square-root factor, recursive
 *        multivariate splitting, and moment-matched collapse.
 */

#ifndef GMSTEER_GM_OPS_HPP
#define GMSTEER_GM_OPS_HPP

#include <vector>

#include "gmsteer/split_library.hpp"
#include "gmsteer/types.hpp"

namespace gmsteer {

/// Symmetric matrix square root S with S*S^T = cov, computed by
/// eigendecomposition. For a diagonal covariance the columns are the
/// coordinate axes scaled by the per-axis standard deviations, so split
/// direction indices coincide with state dimensions. Rejects indefinite input.
MatX covariance_sqrt(const MatX& cov);

/// Splits a Gaussian recursively along the listed split directions (columns of
/// the per-component covariance square root). Each split replaces a component
/// with lib.count children:
///   weight_child = weight * w_l,  mean_child = mean + m_l * s,
///   cov_child = cov + (sigma^2 - 1) * s s^T,
/// with s the square-root column of the split direction. The result has
/// lib.count^dims.size() components.
GaussianMixture split_gaussian(const Gaussian& g, const std::vector<int>& dims,
                               const SplitLibrary& lib);

/// Moment-matched merge of the mixture into a single Gaussian; output
/// covariance is symmetrized.
Gaussian collapse(const GaussianMixture& mix);

}  // namespace gmsteer

#endif
