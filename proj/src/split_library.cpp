#include "gmsteer/split_library.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "gmsteer/types.hpp"

namespace gmsteer {

namespace {

double gauss_pdf(double d, double var) {
    return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);
}

// Component layout for the symmetric, homoscedastic library:
//   L = 3: means (-m1, 0, m1)          weight classes (pair, center)
//   L = 4: means (-m2, -m1, m1, m2)    weight classes (pair1, pair2)
//   L = 5: means (-m2, -m1, 0, m1, m2) weight classes (pair1, pair2, center)
std::vector<double> mirror_means(int count, const std::vector<double>& offsets) {
    std::vector<double> m;
    for (auto it = offsets.rbegin(); it != offsets.rend(); ++it) m.push_back(-*it);
    if (count % 2 == 1) m.push_back(0.0);
    for (double o : offsets) m.push_back(o);
    return m;
}

// Best weights for fixed means/sigma: minimize the closed-form L2 distance
// subject to the unit sum, with mirrored components sharing one weight class.
// Returns false when the KKT solve degenerates or yields nonpositive weights.
bool solve_weights(int count, const std::vector<double>& means, double sigma,
                   std::vector<double>& weights) {
    const int L = count;
    const int ncls = (L % 2 == 1) ? (L / 2 + 1) : (L / 2);
    // Class membership: component i -> class of min(i, L-1-i) mapped from the outside in.
    auto cls_of = [&](int i) {
        const int j = std::min(i, L - 1 - i);
        return (L % 2 == 1 && i == L / 2) ? ncls - 1 : j;
    };

    Eigen::MatrixXd a(L, L);
    Eigen::VectorXd b(L);
    const double var_cross = 1.0 + sigma * sigma;
    const double var_self = 2.0 * sigma * sigma;
    for (int i = 0; i < L; ++i) {
        b(i) = gauss_pdf(means[i], var_cross);
        for (int j = 0; j < L; ++j) a(i, j) = gauss_pdf(means[i] - means[j], var_self);
    }

    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(L, ncls);
    for (int i = 0; i < L; ++i) m(i, cls_of(i)) = 1.0;
    Eigen::MatrixXd at = m.transpose() * a * m;
    Eigen::VectorXd bt = m.transpose() * b;
    Eigen::VectorXd s = m.colwise().sum().transpose();

    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(ncls + 1, ncls + 1);
    kkt.topLeftCorner(ncls, ncls) = 2.0 * at;
    kkt.topRightCorner(ncls, 1) = s;
    kkt.bottomLeftCorner(1, ncls) = s.transpose();
    Eigen::VectorXd rhs(ncls + 1);
    rhs.head(ncls) = 2.0 * bt;
    rhs(ncls) = 1.0;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) return false;
    Eigen::VectorXd sol = lu.solve(rhs);

    weights.assign(L, 0.0);
    for (int i = 0; i < L; ++i) {
        weights[i] = sol(cls_of(i));
        if (!(weights[i] > 0.0) || weights[i] > 1.0) return false;
    }
    return true;
}

struct NelderMeadResult {
    Eigen::VectorXd x;
    double f = std::numeric_limits<double>::infinity();
    bool converged = false;
};

template <class F>
NelderMeadResult nelder_mead(F&& fn, const Eigen::VectorXd& x0, double scale, int max_iter) {
    const int n = static_cast<int>(x0.size());
    std::vector<Eigen::VectorXd> xs(n + 1, x0);
    std::vector<double> fs(n + 1);
    for (int i = 0; i < n; ++i) xs[i + 1](i) += scale;
    for (int i = 0; i <= n; ++i) fs[i] = fn(xs[i]);

    auto order = [&]() {
        for (int i = 0; i <= n; ++i)
            for (int j = i + 1; j <= n; ++j)
                if (fs[j] < fs[i]) { std::swap(fs[i], fs[j]); std::swap(xs[i], xs[j]); }
    };

    NelderMeadResult out;
    for (int it = 0; it < max_iter; ++it) {
        order();
        double xspread = 0.0;
        for (int i = 1; i <= n; ++i) xspread = std::max(xspread, (xs[i] - xs[0]).norm());
        if (std::abs(fs[n] - fs[0]) < 1e-15 && xspread < 1e-12) {
            out.converged = true;
            break;
        }
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) centroid += xs[i];
        centroid /= n;

        Eigen::VectorXd xr = centroid + (centroid - xs[n]);
        double fr = fn(xr);
        if (fr < fs[0]) {
            Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs[n]);
            double fe = fn(xe);
            if (fe < fr) { xs[n] = xe; fs[n] = fe; } else { xs[n] = xr; fs[n] = fr; }
        } else if (fr < fs[n - 1]) {
            xs[n] = xr; fs[n] = fr;
        } else {
            Eigen::VectorXd xc = centroid + 0.5 * (xs[n] - centroid);
            double fc = fn(xc);
            if (fc < fs[n]) {
                xs[n] = xc; fs[n] = fc;
            } else {
                for (int i = 1; i <= n; ++i) {
                    xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
                    fs[i] = fn(xs[i]);
                }
            }
        }
    }
    order();
    out.x = xs[0];
    out.f = fs[0];
    return out;
}

}  // namespace

void SplitLibrary::validate() const {
    if (count < 3 || count > 5) throw DomainError("SplitLibrary: unsupported count " + std::to_string(count));
    if (static_cast<int>(weights.size()) != count || static_cast<int>(means.size()) != count) {
        throw DomainError("SplitLibrary: size mismatch");
    }
    if (!(sigma > 0.0)) throw DomainError("SplitLibrary: sigma must be positive");
    if (!(penalty > 0.0)) throw DomainError("SplitLibrary: penalty must be positive");
    double sum = 0.0;
    for (double w : weights) sum += w;
    if (std::abs(sum - 1.0) > 1e-9) throw DomainError("SplitLibrary: weights sum to " + std::to_string(sum));
    for (int i = 0; i < count; ++i) {
        if (std::abs(means[i] + means[count - 1 - i]) > 1e-9) {
            throw DomainError("SplitLibrary: means not symmetric about zero");
        }
    }
}

double split_objective(const std::vector<double>& weights, const std::vector<double>& means,
                       double sigma, double lambda) {
    const int L = static_cast<int>(weights.size());
    double j = gauss_pdf(0.0, 2.0);  // int N(x;0,1)^2 dx
    for (int i = 0; i < L; ++i) {
        j -= 2.0 * weights[i] * gauss_pdf(means[i], 1.0 + sigma * sigma);
        for (int k = 0; k < L; ++k) {
            j += weights[i] * weights[k] * gauss_pdf(means[i] - means[k], 2.0 * sigma * sigma);
        }
    }
    return j + lambda * sigma * sigma;
}

SplitLibrary generate_split_library(int count, double lambda) {
    if (count < 3 || count > 5) {
        throw DomainError("generate_split_library: unsupported component count " + std::to_string(count));
    }
    if (!(lambda > 0.0)) throw DomainError("generate_split_library: lambda must be positive");

    const int noff = count / 2;  // free positive mean offsets; sigma appended last
    auto objective = [&](const Eigen::VectorXd& theta) {
        const double sigma = theta(noff);
        if (!(sigma > 1e-3) || sigma > 2.0) return 1e9;
        std::vector<double> offsets(noff);
        double prev = 0.0;
        for (int i = 0; i < noff; ++i) {
            offsets[i] = theta(i);
            if (!(offsets[i] > prev)) return 1e9;  // enforce 0 < m1 < m2 ordering
            prev = offsets[i];
        }
        const auto means = mirror_means(count, offsets);
        std::vector<double> weights;
        if (!solve_weights(count, means, sigma, weights)) return 1e9;
        return split_objective(weights, means, sigma, lambda);
    };

    // A few starts spanning the plausible range; the landscape is mild.
    std::vector<Eigen::VectorXd> starts;
    if (count == 3) {
        for (double m : {0.8, 1.1, 1.4})
            for (double s : {0.5, 0.7}) {
                Eigen::VectorXd x(2); x << m, s; starts.push_back(x);
            }
    } else if (count == 4) {
        for (double s : {0.45, 0.6}) {
            Eigen::VectorXd x(3); x << 0.5, 1.5, s; starts.push_back(x);
            Eigen::VectorXd y(3); y << 0.7, 1.8, s; starts.push_back(y);
        }
    } else {
        for (double s : {0.4, 0.55}) {
            Eigen::VectorXd x(3); x << 0.9, 1.9, s; starts.push_back(x);
            Eigen::VectorXd y(3); y << 1.1, 2.2, s; starts.push_back(y);
        }
    }

    NelderMeadResult best;
    bool any_converged = false;
    for (const auto& x0 : starts) {
        auto r = nelder_mead(objective, x0, 0.1, 4000);
        any_converged = any_converged || r.converged;
        if (r.f < best.f && r.converged) best = r;
    }
    if (!any_converged || !(best.f < 1e8)) {
        throw DomainError("generate_split_library: optimizer failed to converge within the iteration budget");
    }

    SplitLibrary lib;
    lib.count = count;
    lib.penalty = lambda;
    lib.sigma = best.x(noff);
    std::vector<double> offsets(best.x.data(), best.x.data() + noff);
    lib.means = mirror_means(count, offsets);
    solve_weights(count, lib.means, lib.sigma, lib.weights);
    lib.validate();
    return lib;
}

SplitLibrary split_library_l3_reference() {
    SplitLibrary lib;
    lib.count = 3;
    lib.penalty = 0.001;
    lib.weights = {0.2252246249, 0.5495507502, 0.2252246249};
    lib.means = {-1.0575154615, 0.0, 1.0575154615};
    lib.sigma = 0.6715662887;
    return lib;
}

void save_split_library(const std::string& path, const SplitLibrary& lib) {
    std::ofstream out(path);
    if (!out) throw DomainError("save_split_library: cannot open " + path);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%d %.17g\n", lib.count, lib.penalty);
    out << buf;
    for (int i = 0; i < lib.count; ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", lib.weights[i], lib.means[i], lib.sigma);
        out << buf;
    }
}

SplitLibrary load_split_library(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("load_split_library: cannot open " + path);
    SplitLibrary lib;
    in >> lib.count >> lib.penalty;
    if (!in) throw DomainError("load_split_library: malformed header in " + path);
    lib.weights.resize(lib.count);
    lib.means.resize(lib.count);
    for (int i = 0; i < lib.count; ++i) {
        double s = 0.0;
        in >> lib.weights[i] >> lib.means[i] >> s;
        if (!in) throw DomainError("load_split_library: truncated file " + path);
        lib.sigma = s;
    }
    lib.validate();
    return lib;
}

SplitLibrary split_library_for(int count, double lambda, const std::string& cache_dir) {
    if (count == 3 && std::abs(lambda - 0.001) < 1e-15) return split_library_l3_reference();
    if (!cache_dir.empty()) {
        std::ostringstream name;
        name << cache_dir << "/split_library_L" << count << "_lambda" << lambda << ".txt";
        const std::string path = name.str();
        if (std::filesystem::exists(path)) {
            SplitLibrary lib = load_split_library(path);
            if (lib.count == count && std::abs(lib.penalty - lambda) < 1e-15) return lib;
        }
        SplitLibrary lib = generate_split_library(count, lambda);
        std::filesystem::create_directories(cache_dir);
        save_split_library(path, lib);
        // Re-read so cached and freshly generated runs use identical values.
        return load_split_library(path);
    }
    return generate_split_library(count, lambda);
}

}  // namespace gmsteer
