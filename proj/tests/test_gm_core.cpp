#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "gmsteer/gm_ops.hpp"
#include "gmsteer/rng.hpp"
#include "gmsteer/split_library.hpp"
#include "gmsteer/types.hpp"

using namespace gmsteer;

namespace {

// Table constants the generator must reproduce (L = 3, lambda = 0.001).
const double kW0 = 0.2252246249;
const double kW1 = 0.5495507502;
const double kM = 1.0575154615;
const double kSigma = 0.6715662887;

MatX random_spd(int n, Rng& rng, double eps = 1e-3) {
    MatX a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
    return a.transpose() * a + eps * MatX::Identity(n, n);
}

double normal_pdf(double x, double mean, double sigma) {
    const double z = (x - mean) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
}

}  // namespace

TEST_CASE("generate_split_library reproduces the L=3 reference constants") {
    const auto start = std::chrono::steady_clock::now();
    SplitLibrary lib = generate_split_library(3, 0.001);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(elapsed < 5.0);

    CHECK(lib.count == 3);
    CHECK(std::abs(lib.weights[0] - kW0) < 1e-3);
    CHECK(std::abs(lib.weights[1] - kW1) < 1e-3);
    CHECK(std::abs(lib.weights[2] - kW0) < 1e-3);
    CHECK(std::abs(lib.means[0] + kM) < 1e-3);
    CHECK(std::abs(lib.means[1]) < 1e-9);
    CHECK(std::abs(lib.means[2] - kM) < 1e-3);
    CHECK(std::abs(lib.sigma - kSigma) < 1e-3);
}

TEST_CASE("larger variance penalty shrinks sigma") {
    SplitLibrary base = generate_split_library(3, 0.001);
    SplitLibrary tight = generate_split_library(3, 0.1);
    CHECK(tight.sigma < base.sigma);
}

TEST_CASE("generated libraries satisfy the structural constraints") {
    for (int count : {3, 4, 5}) {
        SplitLibrary lib = generate_split_library(count, 0.001);
        double sum = 0.0;
        for (double w : lib.weights) {
            CHECK(w > 0.0);
            sum += w;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        for (int i = 0; i < count; ++i) {
            CHECK(lib.means[i] == doctest::Approx(-lib.means[count - 1 - i]).epsilon(1e-9));
        }
        CHECK(lib.sigma > 0.0);
        CHECK(lib.sigma < 1.0);
    }
}

TEST_CASE("more components fit the standard normal at least as well") {
    auto fit = [](int count) {
        SplitLibrary lib = generate_split_library(count, 0.001);
        return split_objective(lib.weights, lib.means, lib.sigma, 0.0);
    };
    const double j3 = fit(3), j4 = fit(4), j5 = fit(5);
    CHECK(j4 <= j3 + 1e-10);
    CHECK(j5 <= j4 + 1e-10);
}

TEST_CASE("generate_split_library rejects bad arguments") {
    CHECK_THROWS_AS(generate_split_library(2, 0.001), DomainError);
    CHECK_THROWS_AS(generate_split_library(6, 0.001), DomainError);
    CHECK_THROWS_AS(generate_split_library(3, 0.0), DomainError);
}

TEST_CASE("covariance_sqrt basics") {
    CHECK(covariance_sqrt(MatX::Identity(6, 6)).isApprox(MatX::Identity(6, 6), 1e-14));

    MatX d(2, 2);
    d << 4.0, 0.0, 0.0, 9.0;
    MatX s = covariance_sqrt(d);
    CHECK(s.col(0).norm() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(s.col(1).norm() == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("covariance_sqrt round-trips random SPD matrices") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        MatX p = random_spd(6, rng);
        MatX s = covariance_sqrt(p);
        const double rel = (s * s.transpose() - p).norm() / p.norm();
        CHECK(rel < 1e-10);
    }
}

TEST_CASE("covariance_sqrt rejects indefinite input") {
    MatX p = MatX::Identity(3, 3);
    p(2, 2) = -0.5;
    CHECK_THROWS_AS(covariance_sqrt(p), DomainError);
}

TEST_CASE("splitting a standard univariate normal reproduces the library rows") {
    SplitLibrary lib = split_library_l3_reference();
    Gaussian g(VecX::Zero(1), MatX::Identity(1, 1));
    GaussianMixture mix = split_gaussian(g, {0}, lib);
    REQUIRE(mix.size() == 3);
    for (int l = 0; l < 3; ++l) {
        CHECK(mix.components[l].weight == doctest::Approx(lib.weights[l]).epsilon(1e-14));
        CHECK(mix.components[l].gaussian.mean(0) == doctest::Approx(lib.means[l]).epsilon(1e-14));
        CHECK(mix.components[l].gaussian.cov(0, 0) ==
              doctest::Approx(lib.sigma * lib.sigma).epsilon(1e-14));
    }

    // Collapsed moments from the library values themselves.
    Gaussian merged = collapse(mix);
    const double expect_var = 2.0 * kW0 * kM * kM + kSigma * kSigma;
    CHECK(merged.mean(0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(merged.cov(0, 0) == doctest::Approx(expect_var).epsilon(1e-9));
    CHECK(merged.cov(0, 0) == doctest::Approx(0.9548).epsilon(1e-4));
}

TEST_CASE("empty split dimension list is the identity") {
    SplitLibrary lib = split_library_l3_reference();
    Gaussian g(Vec6::Ones(), Mat6::Identity() * 2.0);
    GaussianMixture mix = split_gaussian(g, {}, lib);
    REQUIRE(mix.size() == 1);
    CHECK(mix.components[0].weight == 1.0);
    CHECK(mix.components[0].gaussian.mean.isApprox(g.mean));
    CHECK(mix.components[0].gaussian.cov.isApprox(g.cov));
}

TEST_CASE("split dimension validation") {
    SplitLibrary lib = split_library_l3_reference();
    Gaussian g(Vec6::Zero(), Mat6::Identity());
    CHECK_THROWS_AS(split_gaussian(g, {0, 0}, lib), DomainError);
    CHECK_THROWS_AS(split_gaussian(g, {6}, lib), DomainError);
    CHECK_THROWS_AS(split_gaussian(g, {-1}, lib), DomainError);
}

TEST_CASE("recursive split count is count^dims") {
    SplitLibrary lib = split_library_l3_reference();
    Gaussian g(Vec6::Zero(), Mat6::Identity());
    CHECK(split_gaussian(g, {3, 4, 5}, lib).size() == 27);
    CHECK(split_gaussian(g, {0, 1, 3, 4, 5}, lib).size() == 243);
}

TEST_CASE("collapse examples") {
    Gaussian g(Vec6::Ones() * 0.5, Mat6::Identity() * 3.0);
    Gaussian single = collapse(GaussianMixture(g));
    CHECK(single.mean.isApprox(g.mean));
    CHECK(single.cov.isApprox(g.cov));

    GaussianMixture two;
    two.components.push_back({0.5, Gaussian(VecX::Constant(1, -1.0), MatX::Identity(1, 1))});
    two.components.push_back({0.5, Gaussian(VecX::Constant(1, 1.0), MatX::Identity(1, 1))});
    Gaussian merged = collapse(two);
    CHECK(merged.mean(0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(merged.cov(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("split/collapse property suite over randomized cases") {
    const auto start = std::chrono::steady_clock::now();
    SplitLibrary lib3 = split_library_l3_reference();
    Rng rng(20250810);
    const int cases = 10000;
    for (int trial = 0; trial < cases; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 5);  // dim 2..6
        VecX mean(n);
        for (int i = 0; i < n; ++i) mean(i) = 2.0 * rng.normal();
        MatX cov = random_spd(n, rng, 1e-4);
        Gaussian g(mean, cov);

        const int ndims = static_cast<int>(rng.next_u64() % std::min(n, 3));
        std::vector<int> dims;
        while (static_cast<int>(dims.size()) < ndims) {
            const int d = static_cast<int>(rng.next_u64() % n);
            if (std::find(dims.begin(), dims.end(), d) == dims.end()) dims.push_back(d);
        }

        GaussianMixture mix = split_gaussian(g, dims, lib3);

        // Weight conservation at full recursion depth.
        CHECK(std::abs(mix.total_weight() - 1.0) < 1e-12 * mix.size());

        Gaussian merged = collapse(mix);
        // Mean preservation.
        CHECK((merged.mean - g.mean).cwiseAbs().maxCoeff() < 1e-12);

        // PSD preservation of every component and of the merge.
        Eigen::SelfAdjointEigenSolver<MatX> es(merged.cov, Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().minCoeff() >=
              -1e-10 * std::max(1.0, es.eigenvalues().maxCoeff()));

        // Covariance contraction: merged.cov <= cov + 1e-9 I in the PSD order.
        MatX diff = g.cov + 1e-9 * MatX::Identity(n, n) - merged.cov;
        Eigen::SelfAdjointEigenSolver<MatX> esd(diff, Eigen::EigenvaluesOnly);
        CHECK(esd.eigenvalues().minCoeff() > -1e-11);
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(elapsed < 60.0);
}

TEST_CASE("L3 mixture tracks the standard normal density within 0.025") {
    SplitLibrary lib = split_library_l3_reference();
    double worst = 0.0;
    for (double x = -4.0; x <= 4.0; x += 1e-3) {
        double mix = 0.0;
        for (int l = 0; l < 3; ++l) {
            mix += lib.weights[l] * normal_pdf(x, lib.means[l], lib.sigma);
        }
        worst = std::max(worst, std::abs(mix - normal_pdf(x, 0.0, 1.0)));
    }
    CHECK(worst < 0.025);
}

TEST_CASE("split library cache file round-trip") {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "gmsteer_lib_cache_test").string();
    fs::remove_all(dir);
    fs::create_directories(dir);

    SplitLibrary lib = split_library_l3_reference();
    const std::string path = dir + "/lib.txt";
    save_split_library(path, lib);
    SplitLibrary loaded = load_split_library(path);
    CHECK(loaded.count == lib.count);
    CHECK(loaded.penalty == lib.penalty);
    CHECK(loaded.sigma == lib.sigma);
    for (int i = 0; i < 3; ++i) {
        CHECK(loaded.weights[i] == lib.weights[i]);
        CHECK(loaded.means[i] == lib.means[i]);
    }

    // Header line is "L lambda"; rows are "weight mean sigma".
    std::FILE* f = std::fopen(path.c_str(), "r");
    REQUIRE(f != nullptr);
    int count = 0;
    double lambda = 0.0;
    REQUIRE(std::fscanf(f, "%d %lf", &count, &lambda) == 2);
    CHECK(count == 3);
    CHECK(lambda == 0.001);
    std::fclose(f);

    // Generated libraries are cached and re-read with file precision.
    SplitLibrary l4a = split_library_for(4, 0.001, dir);
    CHECK(fs::exists(dir + "/split_library_L4_lambda0.001.txt"));
    SplitLibrary l4b = split_library_for(4, 0.001, dir);
    CHECK(l4a.sigma == l4b.sigma);
    for (int i = 0; i < 4; ++i) {
        CHECK(l4a.weights[i] == l4b.weights[i]);
        CHECK(l4a.means[i] == l4b.means[i]);
    }
    fs::remove_all(dir);
}

TEST_CASE("mixture validation catches broken invariants") {
    GaussianMixture mix;
    mix.components.push_back({0.6, Gaussian(Vec3::Zero(), Mat3::Identity())});
    CHECK_THROWS_AS(mix.validate(), DomainError);  // weights do not sum to one
    mix.components.push_back({0.4, Gaussian(VecX::Zero(2), MatX::Identity(2, 2))});
    CHECK_THROWS_AS(mix.validate(), DomainError);  // mixed dimensions
}
