#pragma once

#include "kqe/core.hpp"
#include "kqe/kernels.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace kqe {

/// Unit-norm RKHS function u(x) = sum_j c_j k(z_j, x).
struct Direction {
    KernelSpec kernel;
    SampleSet landmarks;  // m x d
    Vector coefficients;  // m

    Eigen::Index dimension() const noexcept { return landmarks.cols(); }

    template <class Point>
    double operator()(const Point& x) const {
        double s = 0.0;
        for (Eigen::Index j = 0; j < landmarks.rows(); ++j)
            s += coefficients[j] * detail::eval_unchecked(kernel, landmarks.row(j), x);
        return s;
    }

    /// c^T K_zz c, the squared RKHS norm.
    double squared_norm() const {
        const Matrix K = gram(kernel, landmarks);
        return coefficients.dot(K * coefficients);
    }
};

/// Where the landmarks z_1..z_m are drawn from.
struct ReferenceMeasure {
    enum class Mode { pooled_empirical, user_supplied };

    Mode mode = Mode::pooled_empirical;
    SampleSet points;

    /// The equal mixture of the two empirical measures: their row concatenation.
    static ReferenceMeasure pooled(const SampleSet& X, const SampleSet& Y) {
        if (X.cols() != Y.cols()) throw ArgumentError("reference measure: column dimension mismatch");
        ReferenceMeasure r;
        r.points.resize(X.rows() + Y.rows(), X.cols());
        r.points.topRows(X.rows()) = X;
        r.points.bottomRows(Y.rows()) = Y;
        return r;
    }

    static ReferenceMeasure user(SampleSet points) {
        return {Mode::user_supplied, std::move(points)};
    }

    /// m rows drawn uniformly with replacement.
    SampleSet draw(Eigen::Index m, Rng& rng) const {
        std::uniform_int_distribution<Eigen::Index> pick(0, points.rows() - 1);
        SampleSet z(m, points.cols());
        for (Eigen::Index j = 0; j < m; ++j) z.row(j) = points.row(pick(rng));
        return z;
    }
};

struct DirectionOptions {
    bool fresh_landmarks = false;  // redraw z_1..z_m for every direction
    int max_attempts = 10;         // resamples of lambda on a degenerate norm
};

/// Coefficients a_j = lambda_j / sqrt(m), lambda ~ N(0, I_m), of the function
/// f = sum_j a_j k(., z_j), which is distributed as the Gaussian measure with
/// covariance operator C_m[g](x) = (1/m) sum_j k(x, z_j) g(z_j).
inline Vector sample_gaussian_coefficients(Eigen::Index m, Rng& rng) {
    require(m >= 1, "sample_gaussian_coefficients: m must be >= 1");
    std::normal_distribution<double> normal(0.0, 1.0);
    const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
    Vector a(m);
    for (Eigen::Index j = 0; j < m; ++j) a[j] = normal(rng) * inv_sqrt_m;
    return a;
}

/// Sample l directions from the projected Gaussian measure with covariance
/// operator C_m[g](x) = (1/m) sum_j k(x, z_j) g(z_j).
///
/// Each direction draws lambda ~ N(0, I_m), forms f = m^{-1/2} sum_j lambda_j k(., z_j)
/// and returns u = f / |f|_H with |f|_H^2 = lambda^T K_zz lambda / m.
inline std::vector<Direction> sample_directions(const KernelSpec& kernel, const ReferenceMeasure& ref,
                                                Eigen::Index m, Eigen::Index l, Rng& rng,
                                                const DirectionOptions& opts = {}) {
    require(m >= 1, "sample_directions: m must be >= 1");
    require(l >= 1, "sample_directions: l must be >= 1");
    require(ref.points.rows() >= 1, "sample_directions: empty reference measure");
    kernel.validate();

    std::vector<Direction> out;
    out.reserve(static_cast<std::size_t>(l));
    SampleSet z = ref.draw(m, rng);
    Matrix K = gram(kernel, z);
    for (Eigen::Index i = 0; i < l; ++i) {
        if (opts.fresh_landmarks && i > 0) {
            z = ref.draw(m, rng);
            K = gram(kernel, z);
        }
        Vector a;
        double norm2 = 0.0;
        bool ok = false;
        for (int attempt = 0; attempt < opts.max_attempts && !ok; ++attempt) {
            a = sample_gaussian_coefficients(m, rng);
            norm2 = a.dot(K * a);
            // Relative floor: a norm lost in rounding noise is as degenerate as zero.
            const double scale = a.cwiseAbs2().dot(K.diagonal().cwiseAbs());
            ok = std::isfinite(norm2) && norm2 > 1e-12 * scale && norm2 > 0.0;
        }
        if (!ok)
            throw DegenerateDataError("sample_directions: RKHS norm of sampled function is not positive "
                                      "after " + std::to_string(opts.max_attempts) + " attempts");
        Direction d;
        d.kernel = kernel;
        d.landmarks = z;
        d.coefficients = a / std::sqrt(norm2);
        out.push_back(std::move(d));
    }
    return out;
}

/// ceil(ln n), at least 1. Default number of directions and landmarks.
inline Eigen::Index default_projection_count(Eigen::Index n) {
    if (n <= 1) return 1;
    return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil(std::log(static_cast<double>(n)))));
}

} // namespace kqe
