#pragma once

#include "kqe/core.hpp"
#include "kqe/directions.hpp"
#include "kqe/kernels.hpp"
#include "kqe/quantiles.hpp"
#include "kqe/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

namespace kqe {

/// Configuration of a kernel quantile discrepancy.
struct KqdConfig {
    int p = 2;
    Eigen::Index l = 0;  // directions; 0 selects ceil(ln n)
    Eigen::Index m = 0;  // landmarks; 0 selects ceil(ln n)
    QuantileWeighting weighting = QuantileWeighting::uniform();
    std::uint64_t seed = 0;
    bool fresh_landmarks = false;

    void validate() const {
        if (p < 1) throw ArgumentError("KQD power p must be >= 1");
        if (l < 0 || m < 0) throw ArgumentError("KQD l and m must be >= 1 (or 0 for the default)");
    }
};

namespace detail {

inline double root(double value, int p) {
    if (p == 1) return value;
    if (p == 2) return std::sqrt(value);
    return std::pow(value, 1.0 / static_cast<double>(p));
}

/// sum_j |sx_j - sy_j|^p w_j over two sorted samples of equal length.
inline double weighted_power_gap(std::span<const double> sx, std::span<const double> sy, int p,
                                 std::span<const double> w) {
    double s = 0.0;
    for (std::size_t j = 0; j < sx.size(); ++j) s += int_pow(std::abs(sx[j] - sy[j]), p) * w[j];
    return s;
}

inline double power_gap(std::span<const double> sx, std::span<const double> sy, int p) {
    double s = 0.0;
    for (std::size_t j = 0; j < sx.size(); ++j) s += int_pow(std::abs(sx[j] - sy[j]), p);
    return s;
}

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// The MMD estimators below are written against kernel accessors so that the
// direct form and the pooled (permutation) form share one summation order.

// Cross sum sum_{i,j} k(x_i, y_j). Row sums and column sums are accumulated in
// the same pass and averaged, which makes the result invariant to swapping X and Y.
template <class Kxy>
double cross_sum(std::size_t nx, std::size_t ny, Kxy&& kxy) {
    std::vector<double> cols(ny, 0.0);
    double by_rows = 0.0;
    for (std::size_t i = 0; i < nx; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < ny; ++j) {
            const double v = kxy(i, j);
            row += v;
            cols[j] += v;
        }
        by_rows += row;
    }
    double by_cols = 0.0;
    for (double c : cols) by_cols += c;
    return 0.5 * (by_rows + by_cols);
}

template <class Kxx, class Kyy, class Kxy>
double mmd2_u_core(std::size_t nx, std::size_t ny, Kxx&& kxx, Kyy&& kyy, Kxy&& kxy) {
    double sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = i + 1; j < nx; ++j) sxx += kxx(i, j);
    for (std::size_t i = 0; i < ny; ++i)
        for (std::size_t j = i + 1; j < ny; ++j) syy += kyy(i, j);
    const double sxy = cross_sum(nx, ny, kxy);
    const double fx = static_cast<double>(nx), fy = static_cast<double>(ny);
    return 2.0 * sxx / (fx * (fx - 1.0)) + 2.0 * syy / (fy * (fy - 1.0)) - 2.0 * sxy / (fx * fy);
}

template <class Kxx, class Kyy, class Kxy>
double mmd2_v_core(std::size_t nx, std::size_t ny, Kxx&& kxx, Kyy&& kyy, Kxy&& kxy) {
    if (nx == ny) {
        // Paired form sum_{i,j} h(i, j): each term vanishes exactly when X = Y.
        double diag = 0.0, off = 0.0;
        for (std::size_t i = 0; i < nx; ++i) {
            diag += (kxx(i, i) + kyy(i, i)) - 2.0 * kxy(i, i);
            for (std::size_t j = i + 1; j < nx; ++j) off += (kxx(i, j) + kyy(i, j)) - (kxy(i, j) + kxy(j, i));
        }
        const double f = static_cast<double>(nx);
        return (diag + 2.0 * off) / (f * f);
    }
    double dxx = 0.0, dyy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < nx; ++i) {
        dxx += kxx(i, i);
        for (std::size_t j = i + 1; j < nx; ++j) sxx += kxx(i, j);
    }
    for (std::size_t i = 0; i < ny; ++i) {
        dyy += kyy(i, i);
        for (std::size_t j = i + 1; j < ny; ++j) syy += kyy(i, j);
    }
    sxy = cross_sum(nx, ny, kxy);
    const double fx = static_cast<double>(nx), fy = static_cast<double>(ny);
    return (dxx + 2.0 * sxx) / (fx * fx) + (dyy + 2.0 * syy) / (fy * fy) - 2.0 * sxy / (fx * fy);
}

template <class Kxx, class Kyy, class Kxy>
double mmd2_linear_core(std::size_t n, Kxx&& kxx, Kyy&& kyy, Kxy&& kxy) {
    const std::size_t half = n / 2;
    double s = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
        const std::size_t a = 2 * i, b = 2 * i + 1;
        s += (kxx(a, b) + kyy(a, b)) - (kxy(a, b) + kxy(b, a));
    }
    return s / static_cast<double>(half);
}

template <class Kxx, class Kyy, class Kxy>
double mmd2_multi_core(std::size_t n, std::size_t r, Kxx&& kxx, Kyy&& kyy, Kxy&& kxy) {
    double s = 0.0;
    for (std::size_t j = 1; j <= r; ++j)
        for (std::size_t i = 0; i + j < n; ++i)
            s += (kxx(i, i + j) + kyy(i, i + j)) - (kxy(i, i + j) + kxy(i + j, i));
    const double fr = static_cast<double>(r), fn = static_cast<double>(n);
    return 2.0 * s / (fr * (2.0 * fn - fr - 1.0));
}

inline auto direct_accessor(const KernelSpec& k, const SampleSet& A, const SampleSet& B) {
    return [&k, &A, &B](std::size_t i, std::size_t j) {
        return eval_unchecked(k, A.row(static_cast<Eigen::Index>(i)), B.row(static_cast<Eigen::Index>(j)));
    };
}

inline void check_same_columns(const SampleSet& X, const SampleSet& Y, const char* what) {
    if (X.cols() != Y.cols()) throw ArgumentError(std::string(what) + ": column dimension mismatch");
}

inline void check_equal_n(const SampleSet& X, const SampleSet& Y, const char* what) {
    check_same_columns(X, Y, what);
    if (X.rows() != Y.rows())
        throw ArgumentError(std::string(what) + ": requires equal sample sizes (got " + std::to_string(X.rows()) +
                            " and " + std::to_string(Y.rows()) + ")");
    if (X.rows() < 1) throw ArgumentError(std::string(what) + ": empty sample");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Kernel quantile discrepancies
// ---------------------------------------------------------------------------

/// Per-direction terms tau_i^p = (1/n) sum_j |[u_i(x)]_j - [u_i(y)]_j|^p f_nu(j/n).
inline std::vector<double> kqd_direction_terms(const SampleSet& X, const SampleSet& Y,
                                               std::span<const Direction> directions, int p,
                                               const QuantileWeighting& weighting) {
    detail::check_equal_n(X, Y, "kqd");
    if (directions.empty()) throw ArgumentError("kqd: no directions");
    if (p < 1) throw ArgumentError("kqd: p must be >= 1");
    const auto n = static_cast<std::size_t>(X.rows());
    const std::vector<double> w = weighting.grid(n);
    std::vector<double> terms;
    terms.reserve(directions.size());
    for (const Direction& u : directions) {
        ProjectedSample px = project(u, X), py = project(u, Y);
        px.sort();
        py.sort();
        terms.push_back(detail::weighted_power_gap(px.values, py.values, p, w) / static_cast<double>(n));
    }
    return terms;
}

/// e-KQD_p^p: the average of the per-direction terms.
inline double ekqd_pp(const SampleSet& X, const SampleSet& Y, std::span<const Direction> directions,
                      const KqdConfig& cfg) {
    cfg.validate();
    const auto terms = kqd_direction_terms(X, Y, directions, cfg.p, cfg.weighting);
    double s = 0.0;
    for (double t : terms) s += t;
    return s / static_cast<double>(terms.size());
}

/// e-KQD_p, the distance scale.
inline double ekqd_p(const SampleSet& X, const SampleSet& Y, std::span<const Direction> directions,
                     const KqdConfig& cfg) {
    return detail::root(ekqd_pp(X, Y, directions, cfg), cfg.p);
}

/// sup-KQD_p^p over the sampled directions.
inline double supkqd_pp(const SampleSet& X, const SampleSet& Y, std::span<const Direction> directions,
                        const KqdConfig& cfg) {
    cfg.validate();
    const auto terms = kqd_direction_terms(X, Y, directions, cfg.p, cfg.weighting);
    return *std::max_element(terms.begin(), terms.end());
}

inline double supkqd_p(const SampleSet& X, const SampleSet& Y, std::span<const Direction> directions,
                       const KqdConfig& cfg) {
    return detail::root(supkqd_pp(X, Y, directions, cfg), cfg.p);
}

/// Gaussian e-KQD end to end: directions drawn from the pooled reference measure
/// with cfg.seed, then e-KQD_p evaluated on them.
inline double gaussian_ekqd(const SampleSet& X, const SampleSet& Y, const KernelSpec& kernel,
                            const KqdConfig& cfg) {
    detail::check_equal_n(X, Y, "gaussian_ekqd");
    Rng rng(cfg.seed);
    const Eigen::Index l = cfg.l > 0 ? cfg.l : default_projection_count(X.rows());
    const Eigen::Index m = cfg.m > 0 ? cfg.m : default_projection_count(X.rows());
    const auto dirs = sample_directions(kernel, ReferenceMeasure::pooled(X, Y), m, l, rng,
                                        DirectionOptions{cfg.fresh_landmarks});
    return ekqd_p(X, Y, dirs, cfg);
}

// ---------------------------------------------------------------------------
// MMD estimators
// ---------------------------------------------------------------------------

/// Unbiased U-statistic MMD^2; may be negative.
inline double mmd2_u(const SampleSet& X, const SampleSet& Y, const KernelSpec& kernel) {
    detail::check_same_columns(X, Y, "mmd2_u");
    if (X.rows() < 2 || Y.rows() < 2) throw ArgumentError("mmd2_u: need at least 2 samples per set");
    kernel.validate();
    return detail::mmd2_u_core(static_cast<std::size_t>(X.rows()), static_cast<std::size_t>(Y.rows()),
                               detail::direct_accessor(kernel, X, X), detail::direct_accessor(kernel, Y, Y),
                               detail::direct_accessor(kernel, X, Y));
}

/// Biased V-statistic MMD^2; nonnegative for positive-definite kernels.
inline double mmd2_v(const SampleSet& X, const SampleSet& Y, const KernelSpec& kernel) {
    detail::check_same_columns(X, Y, "mmd2_v");
    if (X.rows() < 1 || Y.rows() < 1) throw ArgumentError("mmd2_v: empty sample");
    kernel.validate();
    return detail::mmd2_v_core(static_cast<std::size_t>(X.rows()), static_cast<std::size_t>(Y.rows()),
                               detail::direct_accessor(kernel, X, X), detail::direct_accessor(kernel, Y, Y),
                               detail::direct_accessor(kernel, X, Y));
}

/// Linear-time MMD^2 over floor(n/2) disjoint pairs; a trailing odd sample is dropped.
inline double mmd2_linear(const SampleSet& X, const SampleSet& Y, const KernelSpec& kernel) {
    detail::check_equal_n(X, Y, "mmd2_linear");
    if (X.rows() < 2) throw ArgumentError("mmd2_linear: need n >= 2");
    kernel.validate();
    return detail::mmd2_linear_core(static_cast<std::size_t>(X.rows()), detail::direct_accessor(kernel, X, X),
                                    detail::direct_accessor(kernel, Y, Y), detail::direct_accessor(kernel, X, Y));
}

/// ceil((ln n)^2), clamped to [1, n-1].
inline std::size_t default_subdiagonals(std::size_t n) {
    if (n < 2) return 1;
    const double ln = std::log(static_cast<double>(n));
    const auto r = static_cast<std::size_t>(std::ceil(ln * ln));
    return std::clamp<std::size_t>(r, 1, n - 1);
}

/// Incomplete U-statistic over the first r subdiagonals.
inline double mmd2_multi(const SampleSet& X, const SampleSet& Y, const KernelSpec& kernel, std::size_t r) {
    detail::check_equal_n(X, Y, "mmd2_multi");
    const auto n = static_cast<std::size_t>(X.rows());
    if (n < 2) throw ArgumentError("mmd2_multi: need n >= 2");
    if (r < 1 || r > n - 1)
        throw ArgumentError("mmd2_multi: r = " + std::to_string(r) + " outside 1.." + std::to_string(n - 1));
    kernel.validate();
    return detail::mmd2_multi_core(n, r, detail::direct_accessor(kernel, X, X), detail::direct_accessor(kernel, Y, Y),
                                   detail::direct_accessor(kernel, X, Y));
}

inline double mmd2_multi(const SampleSet& X, const SampleSet& Y, const KernelSpec& kernel) {
    return mmd2_multi(X, Y, kernel, default_subdiagonals(static_cast<std::size_t>(X.rows())));
}

/// MMD distance from an MMD^2 estimate: the root of max(0, value).
inline double mmd_distance(double mmd2) { return std::sqrt(std::max(0.0, mmd2)); }

// ---------------------------------------------------------------------------
// Centered e-KQD_2
// ---------------------------------------------------------------------------

/// (1/l) sum_i (mean u_i(x) - mean u_i(y))^2.
inline double mean_difference_term(const SampleSet& X, const SampleSet& Y, std::span<const Direction> directions) {
    double s = 0.0;
    for (const Direction& u : directions) {
        const double d = detail::mean(project(u, X).values) - detail::mean(project(u, Y).values);
        s += d * d;
    }
    return s / static_cast<double>(directions.size());
}

/// Squared centered e-KQD_2 before clamping: e-KQD_2^2 + MMD_U^2 - mean-difference term.
inline double ekqd2_centered_raw(const SampleSet& X, const SampleSet& Y, std::span<const Direction> directions,
                                 const KqdConfig& cfg) {
    if (cfg.p != 2) throw UnsupportedConfigurationError("centered e-KQD is defined for p = 2 only");
    if (!cfg.weighting.is_uniform())
        throw UnsupportedConfigurationError("centered e-KQD decomposition requires uniform quantile weighting");
    if (directions.empty()) throw ArgumentError("ekqd2_centered: no directions");
    const double e2 = ekqd_pp(X, Y, directions, cfg);
    const double mmd = mmd2_u(X, Y, directions.front().kernel);
    return e2 + mmd - mean_difference_term(X, Y, directions);
}

inline double ekqd2_centered(const SampleSet& X, const SampleSet& Y, std::span<const Direction> directions,
                             const KqdConfig& cfg) {
    return std::sqrt(std::max(0.0, ekqd2_centered_raw(X, Y, directions, cfg)));
}

// ---------------------------------------------------------------------------
// Wasserstein
// ---------------------------------------------------------------------------

/// Sorted-sample estimator ((1/n) sum_j |[x]_j - [y]_j|^p)^{1/p}.
inline double wasserstein_1d(std::span<const double> x, std::span<const double> y, int p) {
    if (x.size() != y.size()) throw ArgumentError("wasserstein_1d: length mismatch");
    if (x.empty()) throw ArgumentError("wasserstein_1d: empty input");
    if (p < 1) throw ArgumentError("wasserstein_1d: p must be >= 1");
    std::vector<double> sx(x.begin(), x.end()), sy(y.begin(), y.end());
    std::sort(sx.begin(), sx.end());
    std::sort(sy.begin(), sy.end());
    return detail::root(detail::power_gap(sx, sy, p) / static_cast<double>(sx.size()), p);
}

enum class SlicingMode { expected, max };

/// l directions uniform on the unit sphere S^{d-1}, one per row.
inline Matrix sample_sphere_directions(Eigen::Index d, Eigen::Index l, Rng& rng) {
    require(d >= 1, "sliced wasserstein: dimension must be >= 1");
    require(l >= 1, "sliced wasserstein: l must be >= 1");
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix U(l, d);
    for (Eigen::Index i = 0; i < l; ++i) {
        double norm2 = 0.0;
        do {
            for (Eigen::Index k = 0; k < d; ++k) U(i, k) = normal(rng);
            norm2 = U.row(i).squaredNorm();
        } while (!(norm2 > 0.0));
        U.row(i) /= std::sqrt(norm2);
    }
    return U;
}

/// <u, x_i> for every row of X, summed in coordinate order.
inline std::vector<double> project_linear(const SampleSet& X, const Eigen::Ref<const Eigen::RowVectorXd>& u) {
    std::vector<double> out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) out[static_cast<std::size_t>(i)] = detail::dot(u, X.row(i));
    return out;
}

/// Sliced p-Wasserstein over the given unit directions (rows of U).
inline double sliced_wasserstein(const SampleSet& X, const SampleSet& Y, const Matrix& U, int p, SlicingMode mode) {
    detail::check_equal_n(X, Y, "sliced_wasserstein");
    if (X.cols() < 1) throw ArgumentError("sliced_wasserstein: dimension must be >= 1");
    if (U.cols() != X.cols()) throw ArgumentError("sliced_wasserstein: direction dimension mismatch");
    if (U.rows() < 1) throw ArgumentError("sliced_wasserstein: no directions");
    if (p < 1) throw ArgumentError("sliced_wasserstein: p must be >= 1");
    const auto n = static_cast<double>(X.rows());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
        auto px = project_linear(X, U.row(i)), py = project_linear(Y, U.row(i));
        std::sort(px.begin(), px.end());
        std::sort(py.begin(), py.end());
        const double wpp = detail::power_gap(px, py, p) / n;
        acc = mode == SlicingMode::expected ? acc + wpp : std::max(acc, wpp);
    }
    if (mode == SlicingMode::expected) acc /= static_cast<double>(U.rows());
    return detail::root(acc, p);
}

/// Sliced p-Wasserstein with l fresh uniform directions.
inline double sliced_wasserstein(const SampleSet& X, const SampleSet& Y, Eigen::Index l, int p, Rng& rng,
                                 SlicingMode mode) {
    if (X.cols() < 1) throw ArgumentError("sliced_wasserstein: dimension must be >= 1");
    return sliced_wasserstein(X, Y, sample_sphere_directions(X.cols(), l, rng), p, mode);
}

} // namespace kqe
