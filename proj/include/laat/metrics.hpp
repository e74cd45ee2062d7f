#pragma once

#include "laat/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace laat {

namespace detail {

/// 1-based ranks with ties sharing their average rank.
inline std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && values[order[j]] == values[order[i]]) {
            ++j;
        }
        const double avg = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t) {
            ranks[order[t]] = avg;
        }
        i = j;
    }
    return ranks;
}

} // namespace detail

/// Area under the ROC curve as the Mann-Whitney probability that a random
/// positive outscores a random negative, ties counting one half.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw StatsError(fmt::format("roc_auc: {} scores but {} labels", scores.size(), labels.size()));
    }
    std::size_t n_pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) {
            throw StatsError("roc_auc: labels must be 0 or 1");
        }
        n_pos += static_cast<std::size_t>(y);
    }
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw StatsError("roc_auc: both classes must be present");
    }
    for (double s : scores) {
        if (std::isnan(s)) {
            throw StatsError("roc_auc: NaN score");
        }
    }
    const auto ranks = detail::average_ranks(scores);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) {
            rank_sum += ranks[i];
        }
    }
    const double np = static_cast<double>(n_pos);
    const double u = rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(n_neg));
}

struct WilcoxonResult {
    double statistic = 0.0; ///< min(W+, W-)
    double p_value = 1.0;   ///< two-sided
    std::size_t n_used = 0; ///< pairs with nonzero difference
    std::size_t n_zero = 0; ///< dropped zero differences
    bool exact = true;
    [[nodiscard]] bool significant(double alpha = 0.05) const noexcept { return p_value < alpha; }
};

inline constexpr std::size_t kWilcoxonMinPairs = 5;
inline constexpr std::size_t kWilcoxonExactMax = 25;

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences
/// are dropped, tied magnitudes get average ranks. The null distribution is
/// exact (conditional on the tie pattern) up to 25 pairs, otherwise a normal
/// approximation with tie and continuity corrections.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw StatsError(fmt::format("wilcoxon: samples have different lengths ({} vs {})", a.size(), b.size()));
    }
    std::vector<double> diffs;
    WilcoxonResult res;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (std::isnan(d)) {
            throw StatsError("wilcoxon: NaN difference");
        }
        if (d == 0.0) {
            ++res.n_zero;
        } else {
            diffs.push_back(d);
        }
    }
    const std::size_t n = diffs.size();
    if (n < kWilcoxonMinPairs) {
        throw StatsError(fmt::format("wilcoxon: too few nonzero differences ({} < {})", n, kWilcoxonMinPairs));
    }
    res.n_used = n;
    std::vector<double> mags(n);
    std::transform(diffs.begin(), diffs.end(), mags.begin(), [](double d) { return std::abs(d); });
    const auto ranks = detail::average_ranks(mags);
    double w_plus = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += ranks[i];
        if (diffs[i] > 0.0) {
            w_plus += ranks[i];
        }
    }
    const double w_minus = total - w_plus;
    res.statistic = std::min(w_plus, w_minus);

    if (n <= kWilcoxonExactMax) {
        // Average ranks are multiples of 1/2, so doubled ranks are integers.
        std::vector<std::size_t> doubled(n);
        std::size_t max_sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            doubled[i] = static_cast<std::size_t>(std::llround(2.0 * ranks[i]));
            max_sum += doubled[i];
        }
        std::vector<double> count(max_sum + 1, 0.0);
        count[0] = 1.0;
        std::size_t reach = 0;
        for (std::size_t r : doubled) {
            for (std::size_t s = reach + 1; s-- > 0;) {
                if (count[s] != 0.0) {
                    count[s + r] += count[s];
                }
            }
            reach += r;
        }
        const auto t = static_cast<std::size_t>(std::llround(2.0 * res.statistic));
        double tail = 0.0;
        for (std::size_t s = 0; s <= t; ++s) {
            tail += count[s];
        }
        res.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(n)));
        res.exact = true;
        return res;
    }

    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    std::vector<double> sorted = mags;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && sorted[j] == sorted[i]) {
            ++j;
        }
        const double t = static_cast<double>(j - i);
        var -= (t * t * t - t) / 48.0;
        i = j;
    }
    const double dev = std::max(0.0, std::abs(res.statistic - mean) - 0.5);
    const double z = var > 0.0 ? dev / std::sqrt(var) : 0.0;
    res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    res.exact = false;
    return res;
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0; ///< population standard deviation
};

inline MeanStd mean_std(std::span<const double> v) {
    if (v.empty()) {
        return {};
    }
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    return {mean, std::sqrt(ss / n)};
}

} // namespace laat
