#include "reference.hpp"

#include "laat/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace laat;

using laat::testing::brute_auc;
using laat::testing::enumerated_p;

TEST(RocAuc, Examples) {
    EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}), 1.0);
    EXPECT_EQ(roc_auc(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1}), 0.5);
    EXPECT_EQ(roc_auc(std::vector<double>{0.8, 0.6, 0.4, 0.2}, std::vector<int>{1, 0, 1, 0}), 0.75);
    EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), StatsError);
}

TEST(RocAuc, MatchesPairCountingAndInvariances) {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> size(2, 50);
    std::uniform_int_distribution<int> level(0, 9);
    for (int trial = 0; trial < 300; ++trial) {
        const auto n = static_cast<std::size_t>(size(rng));
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = level(rng) * 0.1;
            y[i] = static_cast<int>(i % 2);
        }
        std::shuffle(y.begin(), y.end(), rng);
        const double auc = roc_auc(s, y);
        EXPECT_NEAR(auc, brute_auc(s, y), 1e-12);
        std::vector<double> t(n);
        std::transform(s.begin(), s.end(), t.begin(), [](double v) { return std::exp(3.0 * v) - 7.0; });
        EXPECT_EQ(roc_auc(t, y), auc);
        std::vector<int> flipped(n);
        std::transform(y.begin(), y.end(), flipped.begin(), [](int v) { return 1 - v; });
        std::vector<double> distinct(n);
        for (std::size_t i = 0; i < n; ++i) {
            distinct[i] = static_cast<double>(i * 37 % 101);
        }
        EXPECT_NEAR(roc_auc(distinct, y) + roc_auc(distinct, flipped), 1.0, 1e-12);
    }
}

TEST(Wilcoxon, AllPositiveSixPairs) {
    const std::vector<double> a{2, 3, 4, 5, 6, 7};
    const std::vector<double> b{1, 1, 1, 1, 1, 1};
    const auto r = wilcoxon_signed_rank(a, b);
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_DOUBLE_EQ(r.p_value, 2.0 / 64.0);
    EXPECT_TRUE(r.significant());
}

TEST(Wilcoxon, IdenticalSamplesAreAnError) {
    const std::vector<double> a{1, 2, 3, 4, 5, 6};
    EXPECT_THROW(wilcoxon_signed_rank(a, a), StatsError);
}

TEST(Wilcoxon, TenPairExample) {
    // Classic paired example with tied magnitudes and a zero difference.
    const std::vector<double> a{125, 115, 130, 140, 140, 115, 140, 125, 140, 135};
    const std::vector<double> b{110, 122, 125, 120, 140, 124, 123, 137, 135, 145};
    const auto r = wilcoxon_signed_rank(a, b);
    EXPECT_EQ(r.n_zero, 1U);
    EXPECT_EQ(r.n_used, 9U);
    EXPECT_EQ(r.statistic, 18.0);
    EXPECT_NEAR(r.p_value, enumerated_p(a, b), 1e-12);
}

TEST(Wilcoxon, MatchesEnumerationAndIsSymmetric) {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> size(5, 12);
    std::uniform_int_distribution<int> small(-4, 4);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<std::size_t>(size(rng));
        std::vector<double> a(n);
        std::vector<double> b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = small(rng);
            b[i] = small(rng);
        }
        std::size_t nonzero = 0;
        for (std::size_t i = 0; i < n; ++i) {
            nonzero += a[i] != b[i];
        }
        if (nonzero < kWilcoxonMinPairs) {
            EXPECT_THROW(wilcoxon_signed_rank(a, b), StatsError);
            continue;
        }
        const auto r = wilcoxon_signed_rank(a, b);
        EXPECT_NEAR(r.p_value, enumerated_p(a, b), 1e-12) << "trial " << trial;
        EXPECT_EQ(wilcoxon_signed_rank(b, a).p_value, r.p_value);
    }
}

TEST(Wilcoxon, NormalApproximationForLargeSamples) {
    std::vector<double> a(40);
    std::vector<double> b(40, 0.0);
    for (std::size_t i = 0; i < 40; ++i) {
        a[i] = (i % 3 == 0 ? -1.0 : 1.0) * static_cast<double>(i + 1);
    }
    const auto r = wilcoxon_signed_rank(a, b);
    EXPECT_FALSE(r.exact);
    EXPECT_GT(r.p_value, 0.0);
    EXPECT_LT(r.p_value, 1.0);
    EXPECT_EQ(wilcoxon_signed_rank(b, a).p_value, r.p_value);
}

TEST(MeanStd, Population) {
    const auto m = mean_std(std::vector<double>{1.0, 2.0, 3.0});
    EXPECT_DOUBLE_EQ(m.mean, 2.0);
    EXPECT_DOUBLE_EQ(m.std, std::sqrt(2.0 / 3.0));
    EXPECT_EQ(mean_std(std::vector<double>{4.0}).std, 0.0);
}
