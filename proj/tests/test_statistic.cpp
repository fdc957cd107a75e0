#include "kqe/statistic.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

namespace kqe {
namespace {

SampleSet normal_sample(Eigen::Index n, Eigen::Index d, Rng& rng, double shift = 0.0) {
    std::normal_distribution<double> normal(shift, 1.0);
    SampleSet s(n, d);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = normal(rng);
    return s;
}

std::vector<std::size_t> identity(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

SampleSet take(const SampleSet& pooled, std::span<const std::size_t> idx) {
    SampleSet out(static_cast<Eigen::Index>(idx.size()), pooled.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pooled.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

TEST(StatisticNames, RoundTrip) {
    for (auto k : all_statistics) EXPECT_EQ(parse_statistic(to_string(k)), k);
    EXPECT_EQ(parse_statistic("mmd-lin"), StatisticKind::mmd_lin);
    EXPECT_EQ(parse_statistic("max-sw"), StatisticKind::max_sw);
    EXPECT_THROW(parse_statistic("mmd"), ArgumentError);
    EXPECT_EQ(parse_kernel_family("poly"), KernelFamily::polynomial);
    EXPECT_THROW(parse_kernel_family("gauss"), ArgumentError);
}

TEST(StatisticConfig, Validation) {
    StatisticConfig c;
    c.kind = StatisticKind::ekqd_centered;
    c.p = 1;
    EXPECT_THROW(c.validate(), UnsupportedConfigurationError);
    c.p = 2;
    c.weighting = QuantileWeighting::triangle();
    EXPECT_THROW(c.validate(), UnsupportedConfigurationError);
    StatisticConfig b;
    b.bandwidth = -1.0;
    EXPECT_THROW(b.validate(), ArgumentError);
}

// Evaluating the pooled statistic on a relabeling must equal the direct
// estimator on the relabeled samples with the same directions and kernel.
TEST(PooledStatistic, MatchesDirectEstimators) {
    Rng rng(50);
    const Eigen::Index n = 23;
    const SampleSet X = normal_sample(n, 3, rng), Y = normal_sample(n, 3, rng, 0.4);
    SampleSet pooled(2 * n, 3);
    pooled << X, Y;
    auto perm = identity(2 * n);
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::span<const std::size_t> ps(perm);
    const SampleSet A = take(pooled, ps.first(n)), B = take(pooled, ps.subspan(n));

    for (auto kind : all_statistics) {
        for (auto fam : {KernelFamily::rbf, KernelFamily::laplacian, KernelFamily::polynomial}) {
            StatisticConfig cfg;
            cfg.kind = kind;
            cfg.kernel = fam;
            cfg.p = kind == StatisticKind::ekqd_centered ? 2 : 1;
            Rng srng(51);
            const PooledStatistic s(X, Y, cfg, srng);
            const KernelSpec& k = s.kernel();
            KqdConfig kc;
            kc.p = cfg.p;
            double direct = 0.0;
            switch (kind) {
            case StatisticKind::ekqd: direct = ekqd_pp(A, B, s.directions(), kc); break;
            case StatisticKind::supkqd: direct = supkqd_pp(A, B, s.directions(), kc); break;
            case StatisticKind::ekqd_centered: direct = ekqd2_centered_raw(A, B, s.directions(), kc); break;
            case StatisticKind::mmd_u: direct = mmd2_u(A, B, k); break;
            case StatisticKind::mmd_v: direct = mmd2_v(A, B, k); break;
            case StatisticKind::mmd_lin: direct = mmd2_linear(A, B, k); break;
            case StatisticKind::mmd_multi: direct = mmd2_multi(A, B, k, s.r()); break;
            case StatisticKind::sw:
                direct = std::pow(sliced_wasserstein(A, B, s.slices(), cfg.p, SlicingMode::expected), cfg.p);
                break;
            case StatisticKind::max_sw:
                direct = std::pow(sliced_wasserstein(A, B, s.slices(), cfg.p, SlicingMode::max), cfg.p);
                break;
            }
            EXPECT_NEAR(s.evaluate(perm), direct, 1e-9 * std::max(1.0, std::abs(direct)))
                << to_string(kind) << " / " << to_string(fam);
        }
    }
}

TEST(PooledStatistic, ObservedIsIdentitySplit) {
    Rng rng(52);
    const SampleSet X = normal_sample(30, 2, rng), Y = normal_sample(30, 2, rng, 1.0);
    StatisticConfig cfg;
    Rng a(53), b(53);
    const PooledStatistic s(X, Y, cfg, a);
    const auto dirs = sample_directions(s.kernel(), ReferenceMeasure::pooled(X, Y), s.m(), s.l(), b);
    EXPECT_EQ(s.observed(), ekqd_pp(X, Y, dirs, {}));
    EXPECT_EQ(s.distance(s.observed()), ekqd_p(X, Y, dirs, {}));
}

TEST(PooledStatistic, FeatureMapAgreesWithGram) {
    Rng rng(54);
    const SampleSet X = normal_sample(40, 2, rng), Y = normal_sample(40, 2, rng, 0.3);
    auto perm = identity(80);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (auto fam : {KernelFamily::linear, KernelFamily::polynomial}) {
        StatisticConfig cfg;
        cfg.kind = StatisticKind::mmd_u;
        cfg.kernel = fam;
        Rng r(1);
        const PooledStatistic s(X, Y, cfg, r);
        EXPECT_TRUE(s.uses_feature_map());
        const std::span<const std::size_t> ps(perm);
        SampleSet pooled(80, 2);
        pooled << X, Y;
        const double via_gram = mmd2_u(take(pooled, ps.first(40)), take(pooled, ps.subspan(40)), s.kernel());
        EXPECT_NEAR(s.evaluate(perm), via_gram, 1e-9);
    }
}

TEST(PooledStatistic, DefaultsFollowSampleSize) {
    Rng rng(55);
    const SampleSet X = normal_sample(100, 2, rng), Y = normal_sample(100, 2, rng);
    StatisticConfig cfg;
    cfg.kind = StatisticKind::mmd_multi;
    const PooledStatistic s(X, Y, cfg, rng);
    EXPECT_EQ(s.l(), 5);
    EXPECT_EQ(s.m(), 5);
    EXPECT_EQ(s.r(), 22u);
}

TEST(PooledStatistic, BandwidthFromMedianHeuristic) {
    Rng rng(56);
    const SampleSet X = normal_sample(20, 2, rng), Y = normal_sample(20, 2, rng);
    StatisticConfig cfg;
    const PooledStatistic s(X, Y, cfg, rng);
    EXPECT_EQ(s.kernel().bandwidth, median_heuristic(X, Y));
    cfg.bandwidth = 0.7;
    const PooledStatistic t(X, Y, cfg, rng);
    EXPECT_EQ(t.kernel().bandwidth, 0.7);
}

TEST(PooledStatistic, Errors) {
    Rng rng(57);
    StatisticConfig cfg;
    EXPECT_THROW(PooledStatistic(normal_sample(5, 2, rng), normal_sample(6, 2, rng), cfg, rng), ArgumentError);
    cfg.kind = StatisticKind::mmd_multi;
    cfg.r = 10;
    EXPECT_THROW(PooledStatistic(normal_sample(5, 2, rng), normal_sample(5, 2, rng), cfg, rng), ArgumentError);
    const PooledStatistic ok(normal_sample(5, 2, rng), normal_sample(5, 2, rng), StatisticConfig{}, rng);
    EXPECT_THROW(ok.evaluate(identity(9)), ArgumentError);
}

TEST(PooledStatistic, SwappingLabelsIsExact) {
    Rng rng(58);
    const SampleSet X = normal_sample(25, 3, rng), Y = normal_sample(25, 3, rng, 0.5);
    auto perm = identity(50);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> swapped(perm.begin() + 25, perm.end());
    swapped.insert(swapped.end(), perm.begin(), perm.begin() + 25);
    for (auto kind : all_statistics) {
        StatisticConfig cfg;
        cfg.kind = kind;
        Rng r(9);
        const PooledStatistic s(X, Y, cfg, r);
        EXPECT_EQ(s.evaluate(perm), s.evaluate(swapped)) << to_string(kind);
    }
}

} // namespace
} // namespace kqe
