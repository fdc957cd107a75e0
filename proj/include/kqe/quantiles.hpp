#pragma once

#include "kqe/core.hpp"
#include "kqe/directions.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace kqe {

/// The numbers u(x_1), ..., u(x_n).
struct ProjectedSample {
    std::vector<double> values;
    bool sorted = false;

    void sort() {
        if (!sorted) std::sort(values.begin(), values.end());
        sorted = true;
    }
};

/// j-th smallest element, 1-based; ties counted with multiplicity.
inline double order_statistic(std::span<const double> values, std::size_t j) {
    if (j < 1 || j > values.size())
        throw ArgumentError("order_statistic: index " + std::to_string(j) + " out of range 1.." +
                            std::to_string(values.size()));
    std::vector<double> v(values.begin(), values.end());
    auto it = v.begin() + static_cast<std::ptrdiff_t>(j - 1);
    std::nth_element(v.begin(), it, v.end());
    return *it;
}

/// 1-based index of the alpha-quantile order statistic: max(1, ceil(alpha n)).
inline std::size_t quantile_index(double alpha, std::size_t n) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ArgumentError("quantile level must lie in [0, 1]");
    // Absorb representation error of alpha (e.g. 0.95 * 300 = 284.99999999999997).
    const double scaled = alpha * static_cast<double>(n);
    auto j = static_cast<std::size_t>(std::ceil(scaled - 1e-9 * std::max(1.0, scaled)));
    return std::clamp<std::size_t>(j, 1, n);
}

/// Order-statistic quantile estimator [v]_{ceil(alpha n)}.
inline double empirical_quantile(std::span<const double> values, double alpha) {
    if (values.empty()) throw ArgumentError("empirical_quantile: empty input");
    return order_statistic(values, quantile_index(alpha, values.size()));
}

/// Quantile of an already sorted sample; no copy.
inline double sorted_quantile(std::span<const double> sorted_values, double alpha) {
    if (sorted_values.empty()) throw ArgumentError("sorted_quantile: empty input");
    return sorted_values[quantile_index(alpha, sorted_values.size()) - 1];
}

/// u(x_i) for every row of X.
inline ProjectedSample project(const Direction& u, const SampleSet& X) {
    if (u.dimension() != X.cols()) throw ArgumentError("project: dimension mismatch between direction and data");
    ProjectedSample p;
    p.values.resize(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) p.values[static_cast<std::size_t>(i)] = u(X.row(i));
    return p;
}

} // namespace kqe
