#pragma once

#include "kqe/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace kqe {

enum class KernelFamily { rbf, laplacian, linear, polynomial };

/// Kernel family plus parameters.
///
/// rbf:        k(x,y) = exp(-|x-y|^2 / (2 sigma^2))
/// laplacian:  k(x,y) = exp(-|x-y| / sigma)
/// linear:     k(x,y) = <x,y>
/// polynomial: k(x,y) = (<x,y> + c)^T
struct KernelSpec {
    KernelFamily family = KernelFamily::rbf;
    double bandwidth = 1.0;
    int degree = 3;
    double offset = 1.0;

    static KernelSpec rbf(double sigma) { return {KernelFamily::rbf, sigma, 3, 1.0}; }
    static KernelSpec laplacian(double sigma) { return {KernelFamily::laplacian, sigma, 3, 1.0}; }
    static KernelSpec linear() { return {KernelFamily::linear, 1.0, 1, 0.0}; }
    static KernelSpec polynomial(int degree = 3, double offset = 1.0) {
        return {KernelFamily::polynomial, 1.0, degree, offset};
    }

    bool uses_bandwidth() const noexcept {
        return family == KernelFamily::rbf || family == KernelFamily::laplacian;
    }

    void validate() const {
        if (uses_bandwidth() && !(bandwidth > 0.0 && std::isfinite(bandwidth)))
            throw ArgumentError("kernel bandwidth must be positive and finite");
        if (family == KernelFamily::polynomial && degree < 1)
            throw ArgumentError("polynomial kernel degree must be >= 1");
        if (family == KernelFamily::polynomial && !std::isfinite(offset))
            throw ArgumentError("polynomial kernel offset must be finite");
    }
};

inline std::string_view to_string(KernelFamily f) {
    switch (f) {
    case KernelFamily::rbf: return "rbf";
    case KernelFamily::laplacian: return "laplacian";
    case KernelFamily::linear: return "linear";
    case KernelFamily::polynomial: return "poly";
    }
    return "?";
}

inline KernelFamily parse_kernel_family(std::string_view s) {
    if (s == "rbf" || s == "gaussian") return KernelFamily::rbf;
    if (s == "laplacian" || s == "laplace") return KernelFamily::laplacian;
    if (s == "linear") return KernelFamily::linear;
    if (s == "poly" || s == "polynomial") return KernelFamily::polynomial;
    throw ArgumentError("unknown kernel family '" + std::string(s) + "'");
}

namespace detail {

template <class A, class B>
double squared_distance(const A& x, const B& y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double t = x[i] - y[i];
        s += t * t;
    }
    return s;
}

template <class A, class B>
double dot(const A& x, const B& y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double int_pow(double base, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

// Unchecked evaluation; every expression is symmetric in (x, y) bit-for-bit.
template <class A, class B>
double eval_unchecked(const KernelSpec& k, const A& x, const B& y) {
    switch (k.family) {
    case KernelFamily::rbf:
        return std::exp(-squared_distance(x, y) / (2.0 * k.bandwidth * k.bandwidth));
    case KernelFamily::laplacian:
        return std::exp(-std::sqrt(squared_distance(x, y)) / k.bandwidth);
    case KernelFamily::linear:
        return dot(x, y);
    case KernelFamily::polynomial:
        return int_pow(dot(x, y) + k.offset, k.degree);
    }
    return 0.0;
}

} // namespace detail

/// k(x, y) for two points of equal dimension.
template <class A, class B>
double eval(const KernelSpec& kernel, const A& x, const B& y) {
    if (x.size() != y.size()) throw ArgumentError("kernel eval: dimension mismatch");
    kernel.validate();
    return detail::eval_unchecked(kernel, x, y);
}

/// Gram matrix, entry (i,j) = k(X_i, Y_j).
inline Matrix gram(const KernelSpec& kernel, const SampleSet& X, const SampleSet& Y) {
    if (X.cols() != Y.cols()) throw ArgumentError("gram: column dimension mismatch");
    kernel.validate();
    Matrix K(X.rows(), Y.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < Y.rows(); ++j)
            K(i, j) = detail::eval_unchecked(kernel, X.row(i), Y.row(j));
    return K;
}

/// Gram matrix of a sample with itself; the upper triangle is mirrored.
inline Matrix gram(const KernelSpec& kernel, const SampleSet& X) {
    kernel.validate();
    const Eigen::Index n = X.rows();
    Matrix K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        K(i, i) = detail::eval_unchecked(kernel, X.row(i), X.row(i));
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = detail::eval_unchecked(kernel, X.row(i), X.row(j));
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    return K;
}

/// Median of a vector; even counts average the two central order statistics.
inline double median(std::vector<double> v) {
    if (v.empty()) throw ArgumentError("median of empty set");
    const std::size_t h = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
    const double upper = v[h];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h));
    return 0.5 * (lower + upper);
}

/// Median of squared pairwise distances over the pooled set Z = X u Y.
///
/// The median is taken over the squared distances themselves and used as the
/// bandwidth sigma directly. Pairs i < j only, unless include_diagonal is set,
/// in which case every ordered pair (i, j) including i == j enters.
inline double median_heuristic(const SampleSet& X, const SampleSet& Y, bool include_diagonal = false) {
    if (X.cols() != Y.cols()) throw ArgumentError("median_heuristic: column dimension mismatch");
    const Eigen::Index n = X.rows() + Y.rows();
    if (n < 2) throw ArgumentError("median_heuristic: need at least 2 pooled points");
    auto point = [&](Eigen::Index i) { return i < X.rows() ? X.row(i) : Y.row(i - X.rows()); };

    std::vector<double> d2;
    d2.reserve(include_diagonal ? static_cast<std::size_t>(n * n)
                                : static_cast<std::size_t>(n * (n - 1) / 2));
    bool any_nonzero = false;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = detail::squared_distance(point(i), point(j));
            any_nonzero = any_nonzero || v > 0.0;
            d2.push_back(v);
            if (include_diagonal) d2.push_back(v);
        }
    }
    if (!any_nonzero) throw DegenerateDataError("median_heuristic: all pairwise distances are zero");
    if (include_diagonal) d2.insert(d2.end(), static_cast<std::size_t>(n), 0.0);
    const double sigma = median(std::move(d2));
    if (!(sigma > 0.0))
        throw DegenerateDataError("median_heuristic: median squared distance is zero");
    return sigma;
}

} // namespace kqe
