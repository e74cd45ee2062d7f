#pragma once

// Repeated seeded experiments, paired comparisons and parameter sweeps.
// Run i of a study uses seed base_seed + i for its split, initialization
// and noise draws, so adding runs never changes earlier ones.

#include "laat/dataset.hpp"
#include "laat/metrics.hpp"
#include "laat/model.hpp"
#include "laat/scorer.hpp"
#include "laat/train.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace laat {

/// Everything needed to turn one seed into one held-out AUC.
struct Pipeline {
    std::shared_ptr<const RawTable> table;
    TaskSpec task;
    std::optional<ScoreVector> scores;
    std::size_t k_shot = 5;
    ModelKind kind = ModelKind::lr;
    TrainConfig train;
    std::vector<BiasRule> bias_rules; ///< restrict which rows may be drawn for training
    double noise_epsilon = 0.0;
};

struct RunResult {
    std::uint64_t seed = 0;
    ModelKind kind = ModelKind::lr;
    double gamma = 0.0;
    double auc = 0.0;
    LossBreakdown final_loss;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
};

struct PairedComparison {
    std::string baseline;
    WilcoxonResult test;
};

struct EvalReport {
    std::string name;
    std::vector<RunResult> runs;
    MeanStd auc;
    std::optional<PairedComparison> comparison;
    std::string comparison_note; ///< why no comparison was made, if none

    [[nodiscard]] std::vector<double> aucs() const {
        std::vector<double> out;
        out.reserve(runs.size());
        for (const auto& r : runs) {
            out.push_back(r.auc);
        }
        return out;
    }
};

struct SweepReport {
    std::string parameter;
    std::vector<std::pair<double, EvalReport>> points;
};

/// Train and evaluate one run.
inline RunResult run_once(const Pipeline& p, std::uint64_t seed) {
    if (!p.table) {
        throw ConfigError("pipeline: no data table");
    }
    const auto& table = *p.table;
    const std::vector<bool> eligible =
        p.bias_rules.empty() ? std::vector<bool>{} : surviving_rows(table, p.bias_rules);
    const auto split = kshot_indices(table.labels, p.k_shot, seed, eligible);
    const auto train_raw = table.subset(split.train);
    const auto test_raw = table.subset(split.test);
    const auto encoder = fit_encoder(train_raw, p.task);
    const auto train_data = transform(encoder, train_raw);
    const auto test_data = transform(encoder, test_raw);

    std::vector<double> scores;
    if (p.train.gamma > 0.0) {
        if (!p.scores) {
            throw ConfigError("pipeline: gamma > 0 requires importance scores");
        }
        if (p.scores->size() != encoder.width()) {
            throw ConfigError(fmt::format("score vector has {} entries but the encoder produces {} columns",
                                          p.scores->size(), encoder.width()));
        }
        scores = p.noise_epsilon > 0.0 ? perturb_scores(*p.scores, p.noise_epsilon, seed).values : p.scores->values;
    }

    TrainConfig cfg = p.train;
    cfg.seed = seed;
    cfg.record_trajectory = false;
    const auto model = train(train_data, scores, cfg, p.kind);

    RunResult r;
    r.seed = seed;
    r.kind = p.kind;
    r.gamma = cfg.gamma;
    r.auc = roc_auc(predict_proba(model.params, test_data), test_data.y);
    r.final_loss = laat_loss(model.params, train_data, scores, cfg.gamma);
    r.train_size = train_data.size();
    r.test_size = test_data.size();
    return r;
}

inline EvalReport summarize(std::string name, std::vector<RunResult> runs) {
    std::sort(runs.begin(), runs.end(), [](const RunResult& a, const RunResult& b) { return a.seed < b.seed; });
    EvalReport rep;
    rep.name = std::move(name);
    rep.runs = std::move(runs);
    const auto aucs = rep.aucs();
    rep.auc = mean_std(aucs);
    return rep;
}

inline EvalReport repeat_runs(const Pipeline& p, std::size_t n_runs, std::uint64_t base_seed,
                              std::string name = "laat") {
    if (n_runs == 0) {
        throw ConfigError("repeat_runs: n_runs must be at least 1");
    }
    std::vector<RunResult> runs;
    runs.reserve(n_runs);
    for (std::size_t i = 0; i < n_runs; ++i) {
        runs.push_back(run_once(p, base_seed + i));
    }
    return summarize(std::move(name), std::move(runs));
}

/// Attach a Wilcoxon comparison of `subject` against `baseline`, paired by seed.
inline void compare_paired(EvalReport& subject, const EvalReport& baseline) {
    if (subject.runs.size() != baseline.runs.size()) {
        throw ConfigError("compare: reports have different run counts");
    }
    for (std::size_t i = 0; i < subject.runs.size(); ++i) {
        if (subject.runs[i].seed != baseline.runs[i].seed) {
            throw ConfigError("compare: reports are not paired by seed");
        }
    }
    try {
        const auto a = subject.aucs();
        const auto b = baseline.aucs();
        subject.comparison = PairedComparison{baseline.name, wilcoxon_signed_rank(a, b)};
        subject.comparison_note.clear();
    } catch (const StatsError& e) {
        subject.comparison.reset();
        subject.comparison_note = fmt::format("no comparison against {}: {}", baseline.name, e.what());
    }
}

/// Same pipeline with gamma 0 and no scores.
inline Pipeline plain_baseline(Pipeline p) {
    p.train.gamma = 0.0;
    p.scores.reset();
    p.noise_epsilon = 0.0;
    return p;
}

struct BenchResult {
    std::size_t k_shot = 0;
    EvalReport laat;
    std::optional<EvalReport> plain;
};

/// For each shot count: LAAT runs and, optionally, plain runs on the same
/// per-seed splits, compared with the signed-rank test.
inline std::vector<BenchResult> run_bench(const Pipeline& p, std::span<const std::size_t> shots, std::size_t n_runs,
                                          std::uint64_t base_seed, bool compare_plain) {
    std::vector<BenchResult> out;
    for (std::size_t k : shots) {
        Pipeline pk = p;
        pk.k_shot = k;
        BenchResult b;
        b.k_shot = k;
        b.laat = repeat_runs(pk, n_runs, base_seed, fmt::format("laat-{}", to_string(p.kind)));
        if (compare_plain) {
            b.plain = repeat_runs(plain_baseline(pk), n_runs, base_seed, fmt::format("plain-{}", to_string(p.kind)));
            compare_paired(b.laat, *b.plain);
        }
        out.push_back(std::move(b));
    }
    return out;
}

namespace detail {

inline void require_increasing(std::span<const double> values, const char* what) {
    if (values.empty()) {
        throw ConfigError(fmt::format("{} sweep: no values", what));
    }
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (!(values[i] > values[i - 1])) {
            throw ConfigError(fmt::format("{} sweep: values must be strictly increasing", what));
        }
    }
}

} // namespace detail

inline SweepReport noise_sweep(const Pipeline& p, std::span<const double> epsilons, std::size_t n_runs,
                               std::uint64_t base_seed) {
    detail::require_increasing(epsilons, "noise");
    for (double e : epsilons) {
        if (!(e >= 0.0 && e <= 1.0)) {
            throw ConfigError(fmt::format("noise sweep: epsilon {} outside [0, 1]", e));
        }
    }
    SweepReport rep{"epsilon", {}};
    for (double e : epsilons) {
        Pipeline pe = p;
        pe.noise_epsilon = e;
        rep.points.emplace_back(e, repeat_runs(pe, n_runs, base_seed, fmt::format("epsilon={}", e)));
    }
    return rep;
}

inline SweepReport gamma_sweep(const Pipeline& p, std::span<const double> gammas, std::size_t n_runs,
                               std::uint64_t base_seed) {
    detail::require_increasing(gammas, "gamma");
    if (gammas.front() < 0.0) {
        throw ConfigError("gamma sweep: gamma must be nonnegative");
    }
    SweepReport rep{"gamma", {}};
    for (double g : gammas) {
        Pipeline pg = p;
        pg.train.gamma = g;
        rep.points.emplace_back(g, repeat_runs(pg, n_runs, base_seed, fmt::format("gamma={}", g)));
    }
    return rep;
}

/// Each point re-aggregates the first n stored score samples.
inline SweepReport estimates_sweep(const Pipeline& p, std::span<const double> counts, std::size_t n_runs,
                                   std::uint64_t base_seed) {
    detail::require_increasing(counts, "estimates");
    if (!p.scores) {
        throw ConfigError("estimates sweep: requires importance scores");
    }
    SweepReport rep{"estimates", {}};
    for (double c : counts) {
        if (c < 1.0 || c != std::floor(c)) {
            throw ConfigError(fmt::format("estimates sweep: {} is not a positive integer", c));
        }
        Pipeline pc = p;
        pc.scores = first_estimates(*p.scores, static_cast<std::size_t>(c));
        rep.points.emplace_back(c, repeat_runs(pc, n_runs, base_seed, fmt::format("estimates={}", c)));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline json to_json(const RunResult& r) {
    return json{{"seed", r.seed},
                {"model", to_string(r.kind)},
                {"gamma", r.gamma},
                {"auc", r.auc},
                {"loss", {{"total", r.final_loss.total}, {"bce", r.final_loss.bce_term}, {"reg", r.final_loss.reg_term}}},
                {"train_size", r.train_size},
                {"test_size", r.test_size}};
}

inline json to_json(const EvalReport& rep) {
    json runs = json::array();
    for (const auto& r : rep.runs) {
        runs.push_back(to_json(r));
    }
    json j{{"name", rep.name}, {"runs", std::move(runs)}, {"auc_mean", rep.auc.mean}, {"auc_std", rep.auc.std}};
    if (rep.comparison) {
        const auto& t = rep.comparison->test;
        j["comparison"] = {{"baseline", rep.comparison->baseline},
                           {"test", "wilcoxon_signed_rank"},
                           {"statistic", t.statistic},
                           {"p_value", t.p_value},
                           {"significant", t.significant(0.05)},
                           {"alpha", 0.05},
                           {"n_pairs", t.n_used},
                           {"zero_differences_dropped", t.n_zero},
                           {"exact", t.exact}};
    } else if (!rep.comparison_note.empty()) {
        j["comparison"] = nullptr;
        j["comparison_note"] = rep.comparison_note;
    }
    return j;
}

inline json to_json(const SweepReport& rep) {
    json points = json::array();
    for (const auto& [value, eval] : rep.points) {
        points.push_back({{"value", value}, {"report", to_json(eval)}});
    }
    return json{{"parameter", rep.parameter}, {"points", std::move(points)}};
}

inline std::string runs_csv_header() { return "report,seed,model,gamma,auc,loss_total,loss_bce,loss_reg\n"; }

inline std::string runs_csv_rows(const EvalReport& rep) {
    std::string out;
    for (const auto& r : rep.runs) {
        out += fmt::format("{},{},{},{},{},{},{},{}\n", rep.name, r.seed, to_string(r.kind), r.gamma, r.auc,
                           r.final_loss.total, r.final_loss.bce_term, r.final_loss.reg_term);
    }
    return out;
}

inline std::string to_csv(const EvalReport& rep) { return runs_csv_header() + runs_csv_rows(rep); }

inline std::string to_csv(const SweepReport& rep) {
    std::string out = fmt::format("{},n_runs,auc_mean,auc_std\n", rep.parameter);
    for (const auto& [value, eval] : rep.points) {
        out += fmt::format("{},{},{},{}\n", value, eval.runs.size(), eval.auc.mean, eval.auc.std);
    }
    return out;
}

} // namespace laat
