#pragma once

#include "kqe/core.hpp"

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace kqe {

/// Inverse CDF of Laplace(0, b): -b sign(u - 1/2) ln(1 - 2|u - 1/2|).
inline double laplace_quantile(double u, double b) {
    const double c = u - 0.5;
    const double s = c < 0.0 ? -1.0 : (c > 0.0 ? 1.0 : 0.0);
    return -b * s * std::log(1.0 - 2.0 * std::abs(c));
}

inline double laplace_cdf(double x, double b) {
    return x < 0.0 ? 0.5 * std::exp(x / b) : 1.0 - 0.5 * std::exp(-x / b);
}

/// A product distribution on R^d.
struct GeneratorSpec {
    enum class Family { gaussian_iso, gaussian_diag, laplace };

    Family family = Family::gaussian_iso;
    Eigen::Index dim = 1;
    std::vector<double> mean;       // empty: zero mean
    std::vector<double> variances;  // gaussian_diag only
    double laplace_scale = 1.0;

    static GeneratorSpec gaussian(Eigen::Index d, std::vector<double> mean = {}) {
        return {Family::gaussian_iso, d, std::move(mean), {}, 1.0};
    }
    static GeneratorSpec gaussian_diag(std::vector<double> variances, std::vector<double> mean = {}) {
        const auto d = static_cast<Eigen::Index>(variances.size());
        return {Family::gaussian_diag, d, std::move(mean), std::move(variances), 1.0};
    }
    static GeneratorSpec laplace(Eigen::Index d, double scale, std::vector<double> mean = {}) {
        return {Family::laplace, d, std::move(mean), {}, scale};
    }

    void validate() const {
        if (dim < 1) throw ArgumentError("generator dimension must be >= 1");
        if (!mean.empty() && static_cast<Eigen::Index>(mean.size()) != dim)
            throw ArgumentError("generator mean has wrong length");
        if (family == Family::gaussian_diag) {
            if (static_cast<Eigen::Index>(variances.size()) != dim)
                throw ArgumentError("generator variances have wrong length");
            for (double v : variances)
                if (!(v > 0.0)) throw ArgumentError("generator variances must be positive");
        }
        if (family == Family::laplace && !(laplace_scale > 0.0))
            throw ArgumentError("laplace scale must be positive");
    }
};

/// n i.i.d. rows from spec.
inline SampleSet generate(const GeneratorSpec& spec, Eigen::Index n, Rng& rng) {
    spec.validate();
    require(n >= 1, "generate: n must be >= 1");
    SampleSet out(n, spec.dim);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < spec.dim; ++k) {
            double v = 0.0;
            switch (spec.family) {
            case GeneratorSpec::Family::gaussian_iso: v = normal(rng); break;
            case GeneratorSpec::Family::gaussian_diag:
                v = std::sqrt(spec.variances[static_cast<std::size_t>(k)]) * normal(rng);
                break;
            case GeneratorSpec::Family::laplace: {
                double u;
                do u = uniform(rng);
                while (u <= 0.0);  // ln(0) at u = 0
                v = laplace_quantile(u, spec.laplace_scale);
                break;
            }
            }
            if (!spec.mean.empty()) v += spec.mean[static_cast<std::size_t>(k)];
            out(i, k) = v;
        }
    }
    return out;
}

/// X ~ N(0, I_d), Y ~ N(0, diag(4, 4, 4, 1, ..., 1)).
inline std::pair<SampleSet, SampleSet> gen_power_decay(Eigen::Index d, Eigen::Index n, Rng& rng) {
    require(d >= 3, "power decay needs d >= 3");
    Rng rx(rng()), ry(rng());
    std::vector<double> var(static_cast<std::size_t>(d), 1.0);
    var[0] = var[1] = var[2] = 4.0;
    return {generate(GeneratorSpec::gaussian(d), n, rx), generate(GeneratorSpec::gaussian_diag(var), n, ry)};
}

/// Laplace scale whose variance 2 b^2 matches a unit-variance Gaussian.
inline const double moment_matched_laplace_scale = 1.0 / std::sqrt(2.0);

/// X ~ N(0, 1), Y ~ Laplace(0, 1/sqrt(2)) in one dimension.
inline std::pair<SampleSet, SampleSet> gen_laplace_vs_gaussian(Eigen::Index n, Rng& rng) {
    require(n >= 1, "laplace vs gaussian needs n >= 1");
    Rng rx(rng()), ry(rng());
    return {generate(GeneratorSpec::gaussian(1), n, rx),
            generate(GeneratorSpec::laplace(1, moment_matched_laplace_scale), n, ry)};
}

} // namespace kqe
