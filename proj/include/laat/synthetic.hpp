#pragma once

// Planted-model tabular tasks with known ground-truth importance, and
// simulated chat replies for offline scoring. Used by the acceptance suite
// and the demo data generator.

#include "laat/dataset.hpp"
#include "laat/provider.hpp"
#include "laat/random.hpp"
#include "laat/scorer.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace laat {

struct SyntheticConfig {
    std::size_t rows = 2000;
    std::size_t features = 10;
    double signal = 1.0;      ///< logit = signal * (w* . x)
    std::uint64_t seed = 7;
    bool spurious_group = false; ///< add a label-independent categorical "group" feature
};

struct SyntheticTask {
    TaskSpec task;
    RawTable table;
    std::vector<double> true_weights; ///< one per encoded column (0 for the group indicators)
    ScoreVector oracle_scores;        ///< true weights rescaled so max |s| = 10
    std::vector<BiasRule> bias_rules; ///< group = a AND positive, group = b AND negative
};

/// x ~ N(0, I), y ~ Bernoulli(sigmoid(signal * w* . x)), w* ~ N(0, I).
inline SyntheticTask planted_logistic_task(const SyntheticConfig& cfg) {
    auto rng = make_rng(cfg.seed, Stream::synthetic);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    SyntheticTask out;
    out.task.task_description = "Predict whether the planted outcome occurs. Yes or no?";
    out.task.positive_label = "yes";
    out.task.negative_label = "no";
    out.task.label_column = "label";
    std::vector<double> w(cfg.features);
    for (std::size_t j = 0; j < cfg.features; ++j) {
        w[j] = gauss(rng);
        out.task.features.push_back({fmt::format("x{}", j + 1),
                                     fmt::format("Measurement number {} of the subject.", j + 1),
                                     FeatureKind::numeric,
                                     {}});
        out.table.columns.push_back(out.task.features.back().name);
    }
    if (cfg.spurious_group) {
        out.task.features.push_back(
            {"group", "Administrative group the record was filed under.", FeatureKind::categorical, {"a", "b"}});
        out.table.columns.push_back("group");
    }
    for (std::size_t i = 0; i < cfg.rows; ++i) {
        std::vector<Cell> row;
        double z = 0.0;
        for (std::size_t j = 0; j < cfg.features; ++j) {
            const double x = gauss(rng);
            z += w[j] * x;
            row.emplace_back(x);
        }
        const int y = unif(rng) < 1.0 / (1.0 + std::exp(-cfg.signal * z)) ? 1 : 0;
        if (cfg.spurious_group) {
            row.emplace_back(std::string(unif(rng) < 0.5 ? "a" : "b"));
        }
        out.table.rows.push_back(std::move(row));
        out.table.labels.push_back(y);
    }

    out.true_weights = w;
    if (cfg.spurious_group) {
        out.true_weights.push_back(0.0);
        out.true_weights.push_back(0.0);
        BiasRule drop_a_pos{{{"group", Comparator::eq, std::string("a")}}, LabelCondition::positive};
        BiasRule drop_b_neg{{{"group", Comparator::eq, std::string("b")}}, LabelCondition::negative};
        out.bias_rules = {drop_a_pos, drop_b_neg};
    }
    double max_abs = 0.0;
    for (double v : out.true_weights) {
        max_abs = std::max(max_abs, std::abs(v));
    }
    std::vector<double> scores(out.true_weights.size());
    for (std::size_t j = 0; j < scores.size(); ++j) {
        scores[j] = max_abs > 0.0 ? 10.0 * out.true_weights[j] / max_abs : 0.0;
    }
    std::vector<std::string> columns;
    for (const auto& f : out.task.features) {
        if (f.is_categorical()) {
            for (const auto& c : f.categories) {
                columns.push_back(f.name + "=" + c);
            }
        } else {
            columns.push_back(f.name);
        }
    }
    out.oracle_scores = score_vector_from_values(std::move(scores), std::move(columns));
    out.oracle_scores.provider = "oracle";
    return out;
}

/// CSV text for a table, header = schema features + label column.
inline std::string table_to_csv(const RawTable& table, const TaskSpec& task) {
    std::string out;
    for (const auto& c : table.columns) {
        out += c;
        out.push_back(',');
    }
    out += task.label_column;
    out.push_back('\n');
    const std::string negative = task.negative_label.empty() ? std::string("no") : task.negative_label;
    for (std::size_t i = 0; i < table.size(); ++i) {
        for (const auto& cell : table.rows[i]) {
            if (const auto* v = std::get_if<double>(&cell)) {
                out += fmt::format("{}", *v);
            } else {
                out += std::get<std::string>(cell);
            }
            out.push_back(',');
        }
        out += table.labels[i] == 1 ? task.positive_label : negative;
        out.push_back('\n');
    }
    return out;
}

/// Replay fixtures that answer the scoring protocol as a chat model would:
/// `n` reasoning replies to the (identical) generation request, each
/// followed by an extraction reply. Sample scores are `target` plus rounded
/// Gaussian jitter. Extraction replies rotate through three formats: a
/// bare array, an array inside prose, and an array in a fenced block.
inline ReplayFixtures simulated_fixtures(const PromptBundle& prompt, const ProviderConfig& cfg,
                                         std::span<const double> target, std::size_t n, std::uint64_t seed,
                                         double jitter = 1.0) {
    if (target.size() != prompt.column_names.size()) {
        throw ConfigError(fmt::format("simulated_fixtures: {} target scores for {} columns", target.size(),
                                      prompt.column_names.size()));
    }
    auto rng = make_rng(seed, Stream::synthetic);
    std::normal_distribution<double> gauss(0.0, jitter);
    ReplayFixtures fixtures;
    const auto gen_req = generation_request(prompt, cfg);
    const auto prompt_tokens = static_cast<long long>((prompt.system.size() + prompt.user.size()) / 4);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<int> scores(target.size());
        std::string reasoning = fmt::format("Estimate {}. Going through the features one at a time.\n", i + 1);
        for (std::size_t j = 0; j < target.size(); ++j) {
            const double v = std::round(target[j] + (jitter > 0.0 ? gauss(rng) : 0.0));
            scores[j] = static_cast<int>(std::clamp(v, static_cast<double>(kMinScore), static_cast<double>(kMaxScore)));
            reasoning += fmt::format("{}. {}: {} the probability of \"{}\", so I assign {}.\n", j + 1,
                                     prompt.column_names[j], scores[j] >= 0 ? "raises" : "lowers", prompt.label,
                                     scores[j]);
        }
        const std::string array = fmt::format("[{}]", fmt::join(scores, ", "));
        std::string extracted;
        switch (i % 3) {
        case 0: extracted = array; break;
        case 1: extracted = fmt::format("The importance scores in order are {} as requested.", array); break;
        default: extracted = fmt::format("```json\n{}\n```", array); break;
        }
        const auto gen_tokens = static_cast<long long>(reasoning.size() / 4);
        fixtures.add(gen_req, ChatReply{reasoning, prompt_tokens, gen_tokens});
        const auto ext_req = extraction_request(prompt, reasoning, cfg);
        fixtures.add(ext_req, ChatReply{extracted, static_cast<long long>(ext_req.messages[0].content.size() / 4) + gen_tokens,
                                        static_cast<long long>(extracted.size() / 4)});
    }
    return fixtures;
}

} // namespace laat
