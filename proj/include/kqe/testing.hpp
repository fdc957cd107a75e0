#pragma once

#include "kqe/core.hpp"
#include "kqe/datagen.hpp"
#include "kqe/parallel.hpp"
#include "kqe/quantiles.hpp"
#include "kqe/statistic.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace kqe {

/// Outcome of one permutation two-sample test.
struct TestResult {
    double statistic = 0.0;   // raw observed statistic
    double threshold = 0.0;   // (1 - level) empirical quantile of the permutation null
    double p_value = 1.0;     // (1 + #{null >= observed}) / (1 + n_permutations)
    bool reject = false;      // statistic > threshold
    std::size_t n_permutations = 0;
    double wall_time = 0.0;   // seconds
    std::vector<double> null_statistics;  // filled when PermutationOptions::keep_null
    std::vector<std::string> warnings;
};

struct PermutationOptions {
    std::size_t n_permutations = 300;
    double level = 0.05;
    bool keep_null = false;
    unsigned threads = 1;
};

/// Below this many permutations the 95th-percentile threshold is unreliable.
inline constexpr std::size_t min_reliable_permutations = 20;

/// Uniformly random relabeling of 2n pooled points (Fisher-Yates).
inline void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(idx[i - 1], idx[pick(rng)]);
    }
}

/// Permutation test with bandwidth and directions frozen from the pooled data.
///
/// The generator is consumed in a fixed order: statistic construction
/// (directions), then one word that keys the per-permutation substreams.
inline TestResult permutation_test(const SampleSet& X, const SampleSet& Y, const StatisticConfig& cfg,
                                   const PermutationOptions& opts, Rng& rng) {
    if (!(opts.level > 0.0 && opts.level < 1.0)) throw ArgumentError("test level must lie in (0, 1)");
    if (opts.n_permutations < 1) throw ArgumentError("need at least one permutation");
    const auto start = std::chrono::steady_clock::now();

    TestResult res;
    if (opts.n_permutations < min_reliable_permutations)
        res.warnings.push_back("only " + std::to_string(opts.n_permutations) +
                               " permutations; the rejection threshold is unreliable");

    const PooledStatistic stat(X, Y, cfg, rng);
    const std::uint64_t perm_key = rng();
    res.statistic = stat.observed();

    std::vector<double> null(opts.n_permutations);
    const std::size_t total = 2 * stat.n();
    parallel_for(
        opts.n_permutations,
        [&](std::size_t b) {
            Rng r = substream(perm_key, {b});
            std::vector<std::size_t> perm(total);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            shuffle_indices(perm, r);
            null[b] = stat.evaluate(perm);
        },
        opts.threads);

    res.n_permutations = opts.n_permutations;
    res.threshold = empirical_quantile(null, 1.0 - opts.level);
    std::size_t at_least = 0;
    for (double v : null) at_least += v >= res.statistic ? 1 : 0;
    res.p_value = static_cast<double>(1 + at_least) / static_cast<double>(1 + opts.n_permutations);
    res.reject = res.statistic > res.threshold;
    if (opts.keep_null) res.null_statistics = std::move(null);
    res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

/// Draws one (X, Y) pair of size n.
using PairGenerator = std::function<std::pair<SampleSet, SampleSet>(Eigen::Index n, Rng& rng)>;

inline PairGenerator make_pair_generator(GeneratorSpec p, GeneratorSpec q) {
    return [p = std::move(p), q = std::move(q)](Eigen::Index n, Rng& rng) {
        Rng rx(rng()), ry(rng());
        return std::pair{generate(p, n, rx), generate(q, n, ry)};
    };
}

struct RejectionSummary {
    double rejection_rate = 0.0;
    std::size_t rejections = 0;
    std::size_t trials = 0;
    double total_test_seconds = 0.0;
};

/// Runs `trials` independent tests on fresh data. Trial t draws its data from
/// substream(seed, {t, 0}) and runs its test on substream(seed, {t, 1}), so
/// results do not depend on thread scheduling.
inline RejectionSummary rejection_rate(const PairGenerator& gen, Eigen::Index n, std::size_t trials,
                                       const StatisticConfig& cfg, const PermutationOptions& opts,
                                       std::uint64_t seed, unsigned threads = 0) {
    if (trials < 1) throw ArgumentError("rejection_rate: trials must be >= 1");
    std::vector<std::uint8_t> rejected(trials, 0);
    std::vector<double> seconds(trials, 0.0);
    PermutationOptions inner = opts;
    inner.threads = 1;
    inner.keep_null = false;
    parallel_for(
        trials,
        [&](std::size_t t) {
            std::pair<SampleSet, SampleSet> data;
            try {
                Rng data_rng = substream(seed, {t, 0});
                data = gen(n, data_rng);
            } catch (const std::exception& e) {
                throw std::runtime_error("trial " + std::to_string(t) + ": data generation failed: " + e.what());
            }
            Rng test_rng = substream(seed, {t, 1});
            const TestResult r = permutation_test(data.first, data.second, cfg, inner, test_rng);
            rejected[t] = r.reject ? 1 : 0;
            seconds[t] = r.wall_time;
        },
        threads);
    RejectionSummary s;
    s.trials = trials;
    for (std::size_t t = 0; t < trials; ++t) {
        s.rejections += rejected[t];
        s.total_test_seconds += seconds[t];
    }
    s.rejection_rate = static_cast<double>(s.rejections) / static_cast<double>(trials);
    return s;
}

/// Rejection rates of one method across a sweep of a single parameter.
struct ExperimentReport {
    struct Point {
        double param_value = 0.0;
        double rejection_rate = 0.0;
        std::size_t trials = 0;

        bool operator==(const Point&) const = default;
    };

    std::string method;
    std::string param_name;
    std::vector<Point> points;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> config;  // echoed run configuration, in order

    bool operator==(const ExperimentReport&) const = default;
};

} // namespace kqe
