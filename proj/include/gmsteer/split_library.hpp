/**
 * @file split_library.hpp
 * @brief Univariate Gaussian splitting libraries: homoscedastic symmetric
 *        mixtures that best approximate the standard normal under an
 *        L2-plus-variance-penalty objective.
 */

#ifndef GMSTEER_SPLIT_LIBRARY_HPP
#define GMSTEER_SPLIT_LIBRARY_HPP

#include <string>
#include <vector>

namespace gmsteer {

/// Precomputed univariate splitting library: L weights/means and a shared sigma.
struct SplitLibrary {
    int count = 0;        // L, number of components (3, 4, or 5)
    double penalty = 0.0; // lambda, variance penalty weight
    std::vector<double> weights;
    std::vector<double> means;
    double sigma = 0.0;   // shared standard deviation of all components

    void validate() const;
};

/// Closed-form value of J = int (N(x;0,1) - mixture)^2 dx + lambda*sigma^2.
/// Exposed for tests; the integral is taken over the whole real line.
double split_objective(const std::vector<double>& weights, const std::vector<double>& means,
                       double sigma, double lambda);

/// Optimizes the splitting library for L in {3,4,5}. Symmetry about zero and
/// the unit weight sum are imposed structurally; the free parameters are the
/// positive mean offsets and sigma, with weights recovered by an
/// equality-constrained least-squares step inside the objective.
SplitLibrary generate_split_library(int count, double lambda);

/// Library constants for L = 3, lambda = 0.001, vetted against the generator.
SplitLibrary split_library_l3_reference();

/// Cache file format: header line "L lambda", then L lines "weight mean sigma".
void save_split_library(const std::string& path, const SplitLibrary& lib);
SplitLibrary load_split_library(const std::string& path);

/// Returns the library for (count, lambda), consulting the reference constants
/// for L = 3 at lambda = 0.001 and a cache directory (when given) otherwise.
/// Freshly generated libraries are written to the cache and re-read so that
/// both cache hits and misses yield file-precision values.
SplitLibrary split_library_for(int count, double lambda, const std::string& cache_dir = "");

}  // namespace gmsteer

#endif
