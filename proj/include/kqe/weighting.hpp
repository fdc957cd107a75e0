#pragma once

#include "kqe/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace kqe {

/// Density f_nu over quantile levels [0, 1].
class QuantileWeighting {
public:
    enum class Shape { uniform, triangle, reverse_triangle, custom_table };

    QuantileWeighting() = default;

    static QuantileWeighting uniform() { return QuantileWeighting(Shape::uniform); }
    /// Peaks at 0.5 (down-weights extreme quantiles), zero at both ends.
    static QuantileWeighting triangle() { return QuantileWeighting(Shape::triangle); }
    /// Peaks at 0 and 1 (up-weights extreme quantiles), zero at 0.5.
    static QuantileWeighting reverse_triangle() { return QuantileWeighting(Shape::reverse_triangle); }

    /// Piecewise-linear density through (i/(k-1), table[i]), rescaled to unit mass.
    static QuantileWeighting custom(std::vector<double> table) {
        if (table.size() < 2) throw ArgumentError("custom weighting needs at least 2 grid values");
        for (double v : table)
            if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("custom weighting values must be finite and >= 0");
        const double h = 1.0 / static_cast<double>(table.size() - 1);
        double mass = 0.0;
        for (std::size_t i = 0; i + 1 < table.size(); ++i) mass += 0.5 * h * (table[i] + table[i + 1]);
        if (!(mass > 0.0)) throw ArgumentError("custom weighting has zero mass");
        for (double& v : table) v /= mass;
        QuantileWeighting w(Shape::custom_table);
        w.table_ = std::move(table);
        return w;
    }

    Shape shape() const noexcept { return shape_; }
    bool is_uniform() const noexcept { return shape_ == Shape::uniform; }

    double operator()(double alpha) const {
        const double a = std::clamp(alpha, 0.0, 1.0);
        switch (shape_) {
        case Shape::uniform: return 1.0;
        case Shape::triangle: return a <= 0.5 ? 4.0 * a : 4.0 * (1.0 - a);
        case Shape::reverse_triangle: return std::abs(4.0 * a - 2.0);
        case Shape::custom_table: {
            const double pos = a * static_cast<double>(table_.size() - 1);
            const auto i = std::min(static_cast<std::size_t>(pos), table_.size() - 2);
            const double t = pos - static_cast<double>(i);
            return (1.0 - t) * table_[i] + t * table_[i + 1];
        }
        }
        return 0.0;
    }

    /// f_nu(j/n) for j = 1..n.
    std::vector<double> grid(std::size_t n) const {
        std::vector<double> w(n);
        for (std::size_t j = 1; j <= n; ++j)
            w[j - 1] = (*this)(static_cast<double>(j) / static_cast<double>(n));
        return w;
    }

private:
    explicit QuantileWeighting(Shape s) : shape_(s) {}

    Shape shape_ = Shape::uniform;
    std::vector<double> table_;
};

inline std::string_view to_string(QuantileWeighting::Shape s) {
    switch (s) {
    case QuantileWeighting::Shape::uniform: return "uniform";
    case QuantileWeighting::Shape::triangle: return "triangle";
    case QuantileWeighting::Shape::reverse_triangle: return "reverse-triangle";
    case QuantileWeighting::Shape::custom_table: return "custom";
    }
    return "?";
}

inline QuantileWeighting parse_weighting(std::string_view s) {
    if (s == "uniform") return QuantileWeighting::uniform();
    if (s == "triangle") return QuantileWeighting::triangle();
    if (s == "reverse-triangle") return QuantileWeighting::reverse_triangle();
    throw ArgumentError("unknown quantile weighting '" + std::string(s) + "'");
}

} // namespace kqe
