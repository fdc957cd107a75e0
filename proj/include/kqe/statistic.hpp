#pragma once

#include "kqe/core.hpp"
#include "kqe/directions.hpp"
#include "kqe/discrepancies.hpp"
#include "kqe/kernels.hpp"
#include "kqe/quantiles.hpp"
#include "kqe/weighting.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kqe {

enum class StatisticKind { ekqd, ekqd_centered, supkqd, mmd_u, mmd_v, mmd_lin, mmd_multi, sw, max_sw };

inline constexpr StatisticKind all_statistics[] = {
    StatisticKind::ekqd,    StatisticKind::ekqd_centered, StatisticKind::supkqd,
    StatisticKind::mmd_u,   StatisticKind::mmd_v,         StatisticKind::mmd_lin,
    StatisticKind::mmd_multi, StatisticKind::sw,          StatisticKind::max_sw,
};

inline std::string_view to_string(StatisticKind k) {
    switch (k) {
    case StatisticKind::ekqd: return "ekqd";
    case StatisticKind::ekqd_centered: return "ekqd-centered";
    case StatisticKind::supkqd: return "supkqd";
    case StatisticKind::mmd_u: return "mmd-u";
    case StatisticKind::mmd_v: return "mmd-v";
    case StatisticKind::mmd_lin: return "mmd-lin";
    case StatisticKind::mmd_multi: return "mmd-multi";
    case StatisticKind::sw: return "sw";
    case StatisticKind::max_sw: return "max-sw";
    }
    return "?";
}

inline StatisticKind parse_statistic(std::string_view s) {
    for (StatisticKind k : all_statistics)
        if (to_string(k) == s) return k;
    throw ArgumentError("unknown statistic '" + std::string(s) + "'");
}

inline bool is_kqd(StatisticKind k) {
    return k == StatisticKind::ekqd || k == StatisticKind::ekqd_centered || k == StatisticKind::supkqd;
}
inline bool is_sliced(StatisticKind k) { return k == StatisticKind::sw || k == StatisticKind::max_sw; }
inline bool needs_kernel(StatisticKind k) { return !is_sliced(k); }

/// Named statistic plus every knob that shapes it.
struct StatisticConfig {
    StatisticKind kind = StatisticKind::ekqd;
    KernelFamily kernel = KernelFamily::rbf;
    std::optional<double> bandwidth;  // empty: median heuristic on the pooled sample
    bool median_include_diagonal = false;
    int degree = 3;
    double offset = 1.0;
    int p = 2;
    Eigen::Index l = 0;   // 0: ceil(ln n)
    Eigen::Index m = 0;   // 0: ceil(ln n)
    std::size_t r = 0;    // 0: ceil((ln n)^2)
    QuantileWeighting weighting = QuantileWeighting::uniform();
    bool fresh_landmarks = false;

    void validate() const {
        if (p < 1) throw ArgumentError("p must be >= 1");
        if (l < 0 || m < 0) throw ArgumentError("l and m must be >= 1");
        if (bandwidth && !(*bandwidth > 0.0)) throw ArgumentError("bandwidth must be positive");
        if (kernel == KernelFamily::polynomial && degree < 1) throw ArgumentError("degree must be >= 1");
        if (kind == StatisticKind::ekqd_centered && p != 2)
            throw UnsupportedConfigurationError("centered e-KQD is defined for p = 2 only");
        if (kind == StatisticKind::ekqd_centered && !weighting.is_uniform())
            throw UnsupportedConfigurationError("centered e-KQD decomposition requires uniform quantile weighting");
    }
};

/// Kernel with its bandwidth resolved against the pooled sample.
inline KernelSpec resolve_kernel(const StatisticConfig& cfg, const SampleSet& X, const SampleSet& Y) {
    KernelSpec k{cfg.kernel, 1.0, cfg.degree, cfg.offset};
    if (k.uses_bandwidth())
        k.bandwidth = cfg.bandwidth ? *cfg.bandwidth : median_heuristic(X, Y, cfg.median_include_diagonal);
    k.validate();
    return k;
}

namespace detail {

// Explicit feature map of the polynomial/linear kernel,
// k(x,y) = sum_t a_t <x^{(x)t}, y^{(x)t}>, a_t = C(T,t) c^{T-t}.
struct TensorFeatures {
    std::vector<std::size_t> block_offset;  // T+2 entries
    std::vector<double> block_weight;       // a_t
    Matrix features;                        // one row per point

    static std::optional<TensorFeatures> build(const KernelSpec& k, const SampleSet& Z, std::size_t max_dim) {
        if (k.family != KernelFamily::linear && k.family != KernelFamily::polynomial) return std::nullopt;
        const int T = k.family == KernelFamily::linear ? 1 : k.degree;
        const double c = k.family == KernelFamily::linear ? 0.0 : k.offset;
        const auto d = static_cast<std::size_t>(Z.cols());
        TensorFeatures tf;
        tf.block_offset.push_back(0);
        std::size_t block = 1;
        for (int t = 0; t <= T; ++t) {
            tf.block_offset.push_back(tf.block_offset.back() + block);
            if (tf.block_offset.back() > max_dim) return std::nullopt;
            double binom = 1.0;
            for (int s = 1; s <= t; ++s) binom = binom * (T - t + s) / s;
            tf.block_weight.push_back(binom * int_pow(c, T - t));
            block *= d;
        }
        const std::size_t D = tf.block_offset.back();
        tf.features.resize(Z.rows(), static_cast<Eigen::Index>(D));
        for (Eigen::Index i = 0; i < Z.rows(); ++i) {
            auto row = tf.features.row(i);
            row[0] = 1.0;
            for (int t = 1; t <= T; ++t) {
                const std::size_t prev = tf.block_offset[t - 1], cur = tf.block_offset[t];
                const std::size_t len = cur - prev;
                for (std::size_t a = 0; a < len; ++a)
                    for (std::size_t b = 0; b < d; ++b)
                        row[static_cast<Eigen::Index>(cur + a * d + b)] =
                            row[static_cast<Eigen::Index>(prev + a)] * Z(i, static_cast<Eigen::Index>(b));
            }
        }
        return tf;
    }

    // sum_t a_t <u_t, v_t> over the tensor blocks.
    double inner(const Vector& u, const Vector& v) const {
        double s = 0.0;
        for (std::size_t t = 0; t < block_weight.size(); ++t) {
            const auto off = static_cast<Eigen::Index>(block_offset[t]);
            const auto len = static_cast<Eigen::Index>(block_offset[t + 1] - block_offset[t]);
            s += block_weight[t] * u.segment(off, len).dot(v.segment(off, len));
        }
        return s;
    }
};

} // namespace detail

/// A statistic frozen on a pooled sample Z = [X; Y].
///
/// Bandwidth, KQD directions and slicing directions are drawn once from the
/// pooled data; evaluate() then recomputes the statistic for any relabeling of
/// the 2n pooled points. evaluate(identity) reproduces the direct estimator on
/// (X, Y) with the same directions.
class PooledStatistic {
public:
    /// Pooled sizes above this evaluate kernels on the fly instead of caching a Gram matrix.
    static constexpr Eigen::Index max_cached_gram = 6000;
    static constexpr Eigen::Index max_cached_sparse_gram = 2048;
    static constexpr std::size_t max_feature_dim = 512;

    PooledStatistic(const SampleSet& X, const SampleSet& Y, const StatisticConfig& cfg, Rng& rng)
        : cfg_(cfg), n_(static_cast<std::size_t>(X.rows())) {
        cfg_.validate();
        detail::check_equal_n(X, Y, "statistic");
        if (X.cols() < 1) throw ArgumentError("statistic: data dimension must be >= 1");
        const auto kind = cfg_.kind;
        if ((kind == StatisticKind::mmd_u || kind == StatisticKind::mmd_lin || kind == StatisticKind::mmd_multi ||
             kind == StatisticKind::ekqd_centered) && n_ < 2)
            throw ArgumentError(std::string(to_string(kind)) + ": need n >= 2");

        pooled_.resize(X.rows() + Y.rows(), X.cols());
        pooled_.topRows(X.rows()) = X;
        pooled_.bottomRows(Y.rows()) = Y;

        const auto n = static_cast<Eigen::Index>(n_);
        if (needs_kernel(kind)) kernel_ = resolve_kernel(cfg_, X, Y);
        l_ = cfg_.l > 0 ? cfg_.l : default_projection_count(n);
        m_ = cfg_.m > 0 ? cfg_.m : default_projection_count(n);
        if (kind == StatisticKind::mmd_multi) {
            r_ = cfg_.r > 0 ? cfg_.r : default_subdiagonals(n_);
            if (r_ < 1 || r_ > n_ - 1)
                throw ArgumentError("mmd-multi: r = " + std::to_string(r_) + " outside 1.." + std::to_string(n_ - 1));
        }
        weights_ = cfg_.weighting.grid(n_);

        if (is_kqd(kind)) {
            directions_ = sample_directions(kernel_, ReferenceMeasure{ReferenceMeasure::Mode::pooled_empirical, pooled_},
                                            m_, l_, rng, DirectionOptions{cfg_.fresh_landmarks});
            for (const Direction& u : directions_) add_projection(project(u, pooled_).values);
        } else if (is_sliced(kind)) {
            slices_ = sample_sphere_directions(pooled_.cols(), l_, rng);
            for (Eigen::Index i = 0; i < slices_.rows(); ++i) add_projection(project_linear(pooled_, slices_.row(i)));
        }

        if (kind == StatisticKind::mmd_u || kind == StatisticKind::mmd_v || kind == StatisticKind::ekqd_centered) {
            features_ = detail::TensorFeatures::build(kernel_, pooled_, max_feature_dim);
            if (features_) {
                diag_.resize(pooled_.rows());
                for (Eigen::Index i = 0; i < pooled_.rows(); ++i)
                    diag_[i] = detail::eval_unchecked(kernel_, pooled_.row(i), pooled_.row(i));
            } else if (pooled_.rows() <= max_cached_gram) {
                gram_ = gram(kernel_, pooled_);
            }
        } else if ((kind == StatisticKind::mmd_lin || kind == StatisticKind::mmd_multi) &&
                   pooled_.rows() <= max_cached_sparse_gram) {
            // These touch O(n r) entries per split; caching pays off only while 4n^2 stays small.
            gram_ = gram(kernel_, pooled_);
        }
    }

    std::size_t n() const noexcept { return n_; }
    const StatisticConfig& config() const noexcept { return cfg_; }
    const KernelSpec& kernel() const noexcept { return kernel_; }
    const std::vector<Direction>& directions() const noexcept { return directions_; }
    const Matrix& slices() const noexcept { return slices_; }
    Eigen::Index l() const noexcept { return l_; }
    Eigen::Index m() const noexcept { return m_; }
    std::size_t r() const noexcept { return r_; }
    bool uses_feature_map() const noexcept { return features_.has_value(); }

    /// Statistic on the original split (X first, Y second).
    double observed() const {
        std::vector<std::size_t> id(2 * n_);
        std::iota(id.begin(), id.end(), std::size_t{0});
        return evaluate(id);
    }

    /// Raw statistic for the split whose first n pooled indices form X and the
    /// remaining n form Y. Raw means: p-th powers for quantile and sliced
    /// statistics, squared (possibly negative) MMD estimates, and the
    /// unclamped squared centered e-KQD.
    double evaluate(std::span<const std::size_t> perm) const {
        if (perm.size() != 2 * n_) throw ArgumentError("evaluate: permutation must have length 2n");
        auto xs = perm.first(n_);
        auto ys = perm.subspan(n_);
        switch (cfg_.kind) {
        case StatisticKind::ekqd: return mean_terms(perm);
        case StatisticKind::supkqd: return max_terms(perm);
        case StatisticKind::sw: return mean_terms(perm);
        case StatisticKind::max_sw: return max_terms(perm);
        case StatisticKind::ekqd_centered: return mean_terms(perm) + mmd_u(xs, ys) - mean_difference(xs, ys);
        case StatisticKind::mmd_u: return mmd_u(xs, ys);
        case StatisticKind::mmd_v: return mmd_v(xs, ys);
        case StatisticKind::mmd_lin: return with_accessors(xs, ys, [&](auto kxx, auto kyy, auto kxy) {
                return detail::mmd2_linear_core(n_, kxx, kyy, kxy);
            });
        case StatisticKind::mmd_multi: return with_accessors(xs, ys, [&](auto kxx, auto kyy, auto kxy) {
                return detail::mmd2_multi_core(n_, r_, kxx, kyy, kxy);
            });
        }
        return 0.0;
    }

    /// Distance-scale value of a raw statistic: p-th root for quantile and
    /// sliced statistics, root of the clamped value for MMD and centered e-KQD.
    double distance(double raw) const {
        switch (cfg_.kind) {
        case StatisticKind::ekqd:
        case StatisticKind::supkqd:
        case StatisticKind::sw:
        case StatisticKind::max_sw: return detail::root(raw, cfg_.p);
        default: return std::sqrt(std::max(0.0, raw));
        }
    }

private:
    void add_projection(std::vector<double> values) {
        std::vector<std::uint32_t> order(values.size());
        std::iota(order.begin(), order.end(), 0u);
        std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return values[a] < values[b]; });
        projections_.push_back(std::move(values));
        orders_.push_back(std::move(order));
    }

    // Per-projection terms via one pass over the pooled sort order: walking
    // the pooled points in sorted order and splitting by label yields both
    // sorted subsamples in O(n).
    template <class Reduce>
    double reduce_terms(std::span<const std::size_t> perm, Reduce&& reduce) const {
        std::vector<std::uint8_t> in_y(2 * n_, 0);
        for (std::size_t k = n_; k < 2 * n_; ++k) in_y[perm[k]] = 1;
        std::vector<double> sx(n_), sy(n_);
        double acc = 0.0;
        for (std::size_t i = 0; i < projections_.size(); ++i) {
            const auto& vals = projections_[i];
            std::size_t a = 0, b = 0;
            for (std::uint32_t idx : orders_[i]) {
                if (in_y[idx]) sy[b++] = vals[idx];
                else sx[a++] = vals[idx];
            }
            const double term = (is_sliced(cfg_.kind) ? detail::power_gap(sx, sy, cfg_.p)
                                                      : detail::weighted_power_gap(sx, sy, cfg_.p, weights_)) /
                                static_cast<double>(n_);
            acc = reduce(acc, term, i);
        }
        return acc;
    }

    double mean_terms(std::span<const std::size_t> perm) const {
        const double s = reduce_terms(perm, [](double acc, double t, std::size_t) { return acc + t; });
        return s / static_cast<double>(projections_.size());
    }

    double max_terms(std::span<const std::size_t> perm) const {
        return reduce_terms(perm, [](double acc, double t, std::size_t i) { return i == 0 ? t : std::max(acc, t); });
    }

    double mean_difference(std::span<const std::size_t> xs, std::span<const std::size_t> ys) const {
        double s = 0.0;
        for (const auto& vals : projections_) {
            double mx = 0.0, my = 0.0;
            for (std::size_t k : xs) mx += vals[k];
            for (std::size_t k : ys) my += vals[k];
            const double d = mx / static_cast<double>(n_) - my / static_cast<double>(n_);
            s += d * d;
        }
        return s / static_cast<double>(projections_.size());
    }

    template <class F>
    double with_accessors(std::span<const std::size_t> xs, std::span<const std::size_t> ys, F&& f) const {
        if (gram_) {
            const Matrix& K = *gram_;
            auto acc = [&K](std::span<const std::size_t> a, std::span<const std::size_t> b) {
                return [&K, a, b](std::size_t i, std::size_t j) {
                    return K(static_cast<Eigen::Index>(a[i]), static_cast<Eigen::Index>(b[j]));
                };
            };
            return f(acc(xs, xs), acc(ys, ys), acc(xs, ys));
        }
        auto acc = [this](std::span<const std::size_t> a, std::span<const std::size_t> b) {
            return [this, a, b](std::size_t i, std::size_t j) {
                return detail::eval_unchecked(kernel_, pooled_.row(static_cast<Eigen::Index>(a[i])),
                                              pooled_.row(static_cast<Eigen::Index>(b[j])));
            };
        };
        return f(acc(xs, xs), acc(ys, ys), acc(xs, ys));
    }

    struct FeatureSums {
        double within_x, within_y, cross, diag_x, diag_y;
    };

    FeatureSums feature_sums(std::span<const std::size_t> xs, std::span<const std::size_t> ys) const {
        const Matrix& F = features_->features;
        Vector sxv = Vector::Zero(F.cols()), syv = Vector::Zero(F.cols());
        double dx = 0.0, dy = 0.0;
        for (std::size_t k : xs) {
            sxv += F.row(static_cast<Eigen::Index>(k)).transpose();
            dx += diag_[static_cast<Eigen::Index>(k)];
        }
        for (std::size_t k : ys) {
            syv += F.row(static_cast<Eigen::Index>(k)).transpose();
            dy += diag_[static_cast<Eigen::Index>(k)];
        }
        // Cross term symmetrised so swapping X and Y is exact.
        const double cross = 0.5 * (features_->inner(sxv, syv) + features_->inner(syv, sxv));
        return {features_->inner(sxv, sxv), features_->inner(syv, syv), cross, dx, dy};
    }

    double mmd_u(std::span<const std::size_t> xs, std::span<const std::size_t> ys) const {
        if (features_) {
            const auto s = feature_sums(xs, ys);
            const double f = static_cast<double>(n_);
            return (s.within_x - s.diag_x) / (f * (f - 1.0)) + (s.within_y - s.diag_y) / (f * (f - 1.0)) -
                   2.0 * s.cross / (f * f);
        }
        return with_accessors(xs, ys, [&](auto kxx, auto kyy, auto kxy) {
            return detail::mmd2_u_core(n_, n_, kxx, kyy, kxy);
        });
    }

    double mmd_v(std::span<const std::size_t> xs, std::span<const std::size_t> ys) const {
        if (features_) {
            const auto s = feature_sums(xs, ys);
            const double f = static_cast<double>(n_);
            return s.within_x / (f * f) + s.within_y / (f * f) - 2.0 * s.cross / (f * f);
        }
        return with_accessors(xs, ys, [&](auto kxx, auto kyy, auto kxy) {
            return detail::mmd2_v_core(n_, n_, kxx, kyy, kxy);
        });
    }

    StatisticConfig cfg_;
    std::size_t n_;
    SampleSet pooled_;
    KernelSpec kernel_;
    Eigen::Index l_ = 1, m_ = 1;
    std::size_t r_ = 0;
    std::vector<double> weights_;
    std::vector<Direction> directions_;
    Matrix slices_;
    std::vector<std::vector<double>> projections_;
    std::vector<std::vector<std::uint32_t>> orders_;
    std::optional<Matrix> gram_;
    std::optional<detail::TensorFeatures> features_;
    Vector diag_;
};

/// Statistic evaluated once on (X, Y), with its metadata.
struct StatisticValue {
    double raw = 0.0;
    double distance = 0.0;
    KernelSpec kernel;
    Eigen::Index l = 0, m = 0;
    std::size_t r = 0;
};

inline StatisticValue compute_statistic(const SampleSet& X, const SampleSet& Y, const StatisticConfig& cfg, Rng& rng) {
    PooledStatistic s(X, Y, cfg, rng);
    StatisticValue v;
    v.raw = s.observed();
    v.distance = s.distance(v.raw);
    v.kernel = s.kernel();
    v.l = s.l();
    v.m = s.m();
    v.r = s.r();
    return v;
}

} // namespace kqe
