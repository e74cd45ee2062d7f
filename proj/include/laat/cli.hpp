#pragma once

// The `laat` command-line program. run_cli() is the whole program so tests
// can drive it in-process; tools/laat.cpp only forwards argv.

#include "laat/cache.hpp"
#include "laat/dataset.hpp"
#include "laat/error.hpp"
#include "laat/hash.hpp"
#include "laat/landscape.hpp"
#include "laat/metrics.hpp"
#include "laat/model.hpp"
#include "laat/provider.hpp"
#include "laat/scorer.hpp"
#include "laat/study.hpp"
#include "laat/synthetic.hpp"
#include "laat/train.hpp"

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace laat::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kDataFailure = 3,
    kProviderFailure = 4,
    kCacheFailure = 5,
};

// ---------------------------------------------------------------------------
// Option registry: every registered option is echoed into the manifest, so
// the manifest's "config" object can be fed back through --config.
// ---------------------------------------------------------------------------

class Registry {
public:
    template <class T>
    CLI::Option* option(CLI::App& app, const std::string& name, T& var, const std::string& desc) {
        getters_.emplace_back(name, [&var] { return json(var); });
        return app.add_option("--" + name, var, desc)->capture_default_str();
    }

    CLI::Option* flag(CLI::App& app, const std::string& name, bool& var, const std::string& desc) {
        getters_.emplace_back(name, [&var] { return json(var); });
        return app.add_flag("--" + name + ",!--no-" + name, var, desc)->capture_default_str();
    }

    /// Positional argument that may also be given as --name.
    CLI::Option* positional(CLI::App& app, const std::string& name, std::string& var, const std::string& desc) {
        getters_.emplace_back(name, [&var] { return json(var); });
        return app.add_option(name + ",--" + name, var, desc);
    }

    [[nodiscard]] json resolved() const {
        json j = json::object();
        for (const auto& [name, get] : getters_) {
            j[name] = get();
        }
        return j;
    }

private:
    std::vector<std::pair<std::string, std::function<json()>>> getters_;
};

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

/// Counts such as --estimates or --runs.
inline CLI::Validator at_least_one() {
    return CLI::Validator(
        [](std::string& s) -> std::string {
            const auto v = laat::detail::parse_double(s);
            return v && *v >= 1.0 ? std::string{} : fmt::format("must be at least 1, got '{}'", s);
        },
        "INT>=1");
}

inline std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto t = laat::detail::trim(item);
        const auto v = laat::detail::parse_double(t);
        if (!v) {
            throw ConfigError(fmt::format("--{}: '{}' is not a number", what, std::string(t)));
        }
        out.push_back(*v);
    }
    if (out.empty()) {
        throw ConfigError(fmt::format("--{}: empty list", what));
    }
    return out;
}

inline std::vector<std::size_t> parse_count_list(const std::string& text, const std::string& what) {
    std::vector<std::size_t> out;
    for (double v : parse_number_list(text, what)) {
        if (v < 1.0 || v != std::floor(v)) {
            throw ConfigError(fmt::format("--{}: {} is not a positive integer", what, v));
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

/// SOURCE_DATE_EPOCH when set, otherwise the wall clock; ISO 8601 UTC.
inline std::string timestamp_utc() {
    std::time_t t = std::time(nullptr);
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde != nullptr && *sde != '\0') {
        const auto v = laat::detail::parse_double(sde);
        if (!v) {
            throw ConfigError(fmt::format("SOURCE_DATE_EPOCH '{}' is not a number", sde));
        }
        t = static_cast<std::time_t>(*v);
    }
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(fmt::format("cannot write '{}'", path.string()));
    }
    out << text;
    if (!out) {
        throw Error(fmt::format("short write to '{}'", path.string()));
    }
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// Planted task on disk: data.csv, schema.json, oracle_scores.json,
/// fixtures.json and, with a spurious group, rules.json.
inline SyntheticTask write_synthetic(const fs::path& dir, const SyntheticConfig& cfg, const ProviderConfig& pc,
                                     std::size_t estimates, double jitter) {
    auto task = planted_logistic_task(cfg);
    fs::create_directories(dir);
    write_text(dir / "data.csv", table_to_csv(task.table, task.task));
    write_json(dir / "schema.json", json(task.task));
    write_json(dir / "oracle_scores.json", score_vector_to_json(task.oracle_scores));
    const auto prompt = build_prompt(task.task, laat::detail::encoder_layout(task.task));
    simulated_fixtures(prompt, pc, task.oracle_scores.values, estimates, cfg.seed, jitter).save(dir / "fixtures.json");
    if (!task.bias_rules.empty()) {
        json rules = json::array();
        for (const auto& r : task.bias_rules) {
            rules.push_back(rule_to_json(r));
        }
        write_json(dir / "rules.json", rules);
    }
    return task;
}

/// Describes a run; written before any long work starts.
struct Manifest {
    std::string command;
    json config = json::object();
    json inputs = json::object();
    json outputs = json::object();

    void input(const std::string& name, const std::string& path) {
        if (!path.empty()) {
            inputs[name] = {{"path", path}, {"sha256", sha256_file(path)}};
        }
    }

    fs::path output(const fs::path& dir, const std::string& name, const std::string& file) {
        const auto p = dir / file;
        outputs[name] = p.string();
        return p;
    }

    void write(const fs::path& dir) const {
        fs::create_directories(dir);
        json j{{"command", command},
               {"config", config},
               {"inputs", inputs},
               {"outputs", outputs},
               {"timestamp", timestamp_utc()},
               {"tool", "laat"}};
        write_json(dir / "manifest.json", j);
    }
};

// ---------------------------------------------------------------------------
// Shared option groups
// ---------------------------------------------------------------------------

struct DataOptions {
    std::string data;
    std::string schema;
    std::string scores;

    void add(CLI::App& app, Registry& reg, bool need_data = true) {
        auto* d = reg.option(app, "data", data, "CSV dataset");
        if (need_data) {
            d->required();
        }
        reg.option(app, "schema", schema, "task schema JSON")->required();
        reg.option(app, "scores", scores, "importance score JSON from `laat score`");
    }
};

struct ModelOptions {
    std::string model = "lr";
    double gamma = 100.0;
    double lr = 1e-2;
    int epochs = 200;
    std::size_t hidden = kDefaultHidden;

    void add(CLI::App& app, Registry& reg) {
        reg.option(app, "model", model, "model family")->check(CLI::IsMember({"lr", "mlp"}));
        reg.option(app, "gamma", gamma, "attribution alignment weight")->check(CLI::NonNegativeNumber);
        reg.option(app, "lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
        reg.option(app, "epochs", epochs, "full-batch training epochs")->check(at_least_one());
        reg.option(app, "hidden", hidden, "MLP hidden width")->check(at_least_one());
    }

    [[nodiscard]] TrainConfig train_config(std::uint64_t seed) const {
        TrainConfig c;
        c.gamma = gamma;
        c.learning_rate = lr;
        c.epochs = epochs;
        c.hidden = hidden;
        c.seed = seed;
        return c;
    }
};

struct Loaded {
    TaskSpec task;
    std::shared_ptr<const RawTable> table;
    std::optional<ScoreVector> scores;
};

inline void check_scores_match(const ScoreVector& s, const Encoder& layout) {
    if (s.size() != layout.width()) {
        throw ConfigError(fmt::format("score vector has {} entries but the encoder produces {} columns", s.size(),
                                      layout.width()));
    }
    if (!s.column_names.empty()) {
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (s.column_names[j] != layout.column_names[j]) {
                throw ConfigError(fmt::format("score column {} is '{}' but the encoder column is '{}'", j + 1,
                                              s.column_names[j], layout.column_names[j]));
            }
        }
    }
}

inline Loaded load_inputs(const DataOptions& o, bool need_scores) {
    if (need_scores && o.scores.empty()) {
        throw ConfigError("--gamma > 0 requires --scores");
    }
    Loaded in;
    in.task = load_task(o.schema);
    if (!o.data.empty()) {
        in.table = std::make_shared<const RawTable>(load_csv(o.data, in.task));
    }
    if (!o.scores.empty()) {
        in.scores = load_scores(o.scores);
        check_scores_match(*in.scores, laat::detail::encoder_layout(in.task));
    }
    return in;
}

inline std::string prefix_lines(const std::string& prefix, const std::string& text) {
    std::string out;
    std::size_t start = 0;
    while (start < text.size()) {
        const auto end = text.find('\n', start);
        out += prefix;
        out += text.substr(start, end == std::string::npos ? std::string::npos : end - start + 1);
        if (end == std::string::npos) {
            break;
        }
        start = end + 1;
    }
    return out;
}

/// `*` marks p < 0.05; the test is two-sided, so the direction is spelled out.
inline std::string comparison_text(const EvalReport& rep, const EvalReport& baseline) {
    if (rep.comparison) {
        const auto& t = rep.comparison->test;
        const char* dir = rep.auc.mean > baseline.auc.mean ? "higher" : "lower";
        return fmt::format("p = {:.4g} ({}, W = {}, n = {}){}", t.p_value, t.exact ? "exact" : "normal approx.",
                           t.statistic, t.n_used, t.significant(0.05) ? fmt::format(" * {}", dir) : "");
    }
    return rep.comparison_note.empty() ? std::string("n/a") : rep.comparison_note;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreCommand {
    std::string schema;
    std::size_t estimates = 5;
    std::string cache_dir = ScoreCache::default_dir().string();
    bool use_cache = true;
    std::string provider = "live";
    std::string fixtures;
    std::string record;
    ProviderConfig pc;
    std::string out_dir = "laat_out";

    void add(CLI::App& app, Registry& reg) {
        reg.option(app, "schema", schema, "task schema JSON")->required();
        reg.option(app, "estimates", estimates, "score generations to average")->check(at_least_one());
        reg.option(app, "cache-dir", cache_dir, "score cache directory ($LAAT_CACHE_DIR)");
        reg.flag(app, "cache", use_cache, "read and write the score cache");
        reg.option(app, "provider", provider, "live HTTP or recorded replay")->check(CLI::IsMember({"live", "replay"}));
        reg.option(app, "fixtures", fixtures, "replay fixture JSON (replay mode)");
        reg.option(app, "record", record, "write every exchange to this fixture file");
        reg.option(app, "base-url", pc.base_url, "chat-completions API base URL");
        reg.option(app, "llm", pc.model, "chat model name");
        reg.option(app, "temperature", pc.temperature, "generation temperature");
        reg.option(app, "timeout", pc.timeout_seconds, "HTTP timeout in seconds")->check(CLI::PositiveNumber);
        reg.option(app, "retries", pc.retry_limit, "extra attempts per request")->check(CLI::NonNegativeNumber);
        reg.option(app, "backoff-ms", pc.retry_backoff_ms, "initial retry backoff")->check(CLI::NonNegativeNumber);
        reg.option(app, "out-dir", out_dir, "output directory");
    }

    int run(const Registry& reg, std::ostream& out) {
        pc.mode = provider == "replay" ? ProviderMode::replay : ProviderMode::live;
        pc.fixture_path = fixtures;
        auto backend = make_backend(pc); // fails here, before any request, without credentials
        std::unique_ptr<RecordingChatBackend> recorder;
        ChatBackend* active = backend.get();
        if (!record.empty()) {
            recorder = std::make_unique<RecordingChatBackend>(*backend);
            active = recorder.get();
        }

        const auto task = load_task(schema);
        const auto prompt = build_prompt(task, laat::detail::encoder_layout(task));

        Manifest m{"score", reg.resolved()};
        m.input("schema", schema);
        m.input("fixtures", fixtures);
        const auto scores_path = m.output(out_dir, "scores", "scores.json");
        m.write(out_dir);

        ScoreCache cache(cache_dir);
        std::optional<ScoreVector> result;
        std::string source = "provider";
        if (use_cache) {
            if (auto hit = cache.get(prompt.hash(), pc.model); hit && hit->samples.size() >= estimates) {
                result = first_estimates(*hit, estimates);
                source = "cache";
            }
        }
        if (!result) {
            result = generate_scores(prompt, pc, *active, estimates);
            if (use_cache) {
                cache.put(*result);
            }
        }
        if (recorder) {
            recorder->fixtures().save(record);
        }
        write_json(scores_path, score_vector_to_json(*result));

        std::size_t width = 6;
        for (const auto& c : result->column_names) {
            width = std::max(width, c.size());
        }
        fmt::print(out, "{:<{}}  score\n", "column", width);
        for (std::size_t j = 0; j < result->size(); ++j) {
            fmt::print(out, "{:<{}}  {:.2f}\n", result->column_names[j], width, result->values[j]);
        }
        fmt::print(out, "estimates: {}  source: {}  model: {}\n", result->n_estimates, source, result->model);
        fmt::print(out, "tokens: input {}  output {}\n", result->usage.input_tokens, result->usage.output_tokens);
        fmt::print(out, "wrote {}\n", scores_path.string());
        return kOk;
    }
};

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainCommand {
    DataOptions io;
    ModelOptions mo;
    std::size_t k_shot = 5;
    std::uint64_t seed = 0;
    std::string out_dir = "laat_out";

    void add(CLI::App& app, Registry& reg) {
        io.add(app, reg);
        mo.add(app, reg);
        reg.option(app, "k-shot", k_shot, "training examples per class")->check(at_least_one());
        reg.option(app, "seed", seed, "split and initialization seed");
        reg.option(app, "out-dir", out_dir, "output directory");
    }

    int run(const Registry& reg, std::ostream& out) {
        const auto in = load_inputs(io, mo.gamma > 0.0);
        Manifest m{"train", reg.resolved()};
        m.input("data", io.data);
        m.input("schema", io.schema);
        m.input("scores", io.scores);
        const auto model_path = m.output(out_dir, "model", "model.json");
        const auto history_path = m.output(out_dir, "history", "history.csv");
        m.write(out_dir);

        const auto& table = *in.table;
        const auto split = kshot_indices(table.labels, k_shot, seed);
        const auto train_raw = table.subset(split.train);
        const auto enc = fit_encoder(train_raw, in.task);
        const auto train_data = transform(enc, train_raw);
        const auto test_data = transform(enc, table.subset(split.test));

        auto cfg = mo.train_config(seed);
        cfg.record_trajectory = true;
        const std::vector<double> scores = mo.gamma > 0.0 ? in.scores->values : std::vector<double>{};
        const auto model = train(train_data, scores, cfg, parse_model_kind(mo.model));

        json mj = model_to_json(model, enc.column_names);
        mj["encoder"] = enc;
        mj["split"] = {{"seed", seed}, {"k_shot", k_shot}, {"data_sha256", sha256_file(io.data)}};
        write_json(model_path, mj);

        std::string hist = "epoch,total,bce,reg\n";
        for (std::size_t e = 0; e < model.history.size(); ++e) {
            const auto& l = model.history[e];
            hist += fmt::format("{},{},{},{}\n", e, l.total, l.bce_term, l.reg_term);
        }
        write_text(history_path, hist);

        const auto final_loss = laat_loss(model.params, train_data, scores, cfg.gamma);
        const double auc = roc_auc(predict_proba(model.params, test_data), test_data.y);
        fmt::print(out, "model: {}  gamma: {}  train rows: {}  test rows: {}\n", mo.model, cfg.gamma,
                   train_data.size(), test_data.size());
        fmt::print(out, "final train loss: {:.6f} (bce {:.6f}, reg {:.6f})\n", final_loss.total, final_loss.bce_term,
                   final_loss.reg_term);
        fmt::print(out, "test ROC AUC: {:.4f}\n", auc);
        fmt::print(out, "wrote {}\n", model_path.string());
        return kOk;
    }
};

// ---------------------------------------------------------------------------
// bench / bias
// ---------------------------------------------------------------------------

struct BenchCommand {
    DataOptions io;
    ModelOptions mo;
    std::size_t runs = 20;
    std::string shots = "1,5,10";
    bool compare_plain = true;
    std::uint64_t seed = 0;
    std::string rules; ///< bias command only
    std::string out_dir = "laat_out";
    bool bias = false;

    void add(CLI::App& app, Registry& reg, bool with_rules) {
        bias = with_rules;
        io.add(app, reg);
        mo.add(app, reg);
        reg.option(app, "runs", runs, "seeded runs per shot count")->check(at_least_one());
        reg.option(app, "shots", shots, "comma-separated shot counts");
        reg.flag(app, "compare-plain", compare_plain, "also train plain models and run the signed-rank test");
        reg.option(app, "seed", seed, "base seed; run i uses seed + i");
        if (with_rules) {
            reg.option(app, "rules", rules, "bias rule JSON (applied to training rows only)")->required();
        }
        reg.option(app, "out-dir", out_dir, "output directory");
    }

    int run(const Registry& reg, std::ostream& out) {
        const auto shot_list = parse_count_list(shots, "shots");
        const auto in = load_inputs(io, mo.gamma > 0.0);
        Pipeline p;
        p.table = in.table;
        p.task = in.task;
        p.scores = in.scores;
        p.kind = parse_model_kind(mo.model);
        p.train = mo.train_config(seed);
        if (bias) {
            p.bias_rules = load_bias_rules(rules, in.task);
        }

        const std::string stem = bias ? "bias" : "bench";
        Manifest m{stem, reg.resolved()};
        m.input("data", io.data);
        m.input("schema", io.schema);
        m.input("scores", io.scores);
        m.input("rules", rules);
        const auto json_path = m.output(out_dir, "report", stem + ".json");
        const auto summary_path = m.output(out_dir, "summary", stem + "_summary.csv");
        const auto runs_path = m.output(out_dir, "runs", stem + "_runs.csv");
        m.write(out_dir);

        const auto results = run_bench(p, shot_list, runs, seed, compare_plain);

        json jr = json::array();
        std::string runs_csv = "k_shot," + runs_csv_header();
        std::string summary = "k_shot,report,n_runs,auc_mean,auc_std,p_value\n";
        fmt::print(out, "{:>6}  {:>16}  {:>16}  comparison\n", "k", "laat auc", "plain auc");
        for (const auto& b : results) {
            json entry{{"k_shot", b.k_shot}, {"laat", to_json(b.laat)}};
            runs_csv += prefix_lines(fmt::format("{},", b.k_shot), runs_csv_rows(b.laat));
            const std::string p_text = b.laat.comparison ? fmt::format("{}", b.laat.comparison->test.p_value) : "";
            summary += fmt::format("{},{},{},{},{},{}\n", b.k_shot, b.laat.name, b.laat.runs.size(), b.laat.auc.mean,
                                   b.laat.auc.std, p_text);
            std::string plain_text = "-";
            if (b.plain) {
                entry["plain"] = to_json(*b.plain);
                runs_csv += prefix_lines(fmt::format("{},", b.k_shot), runs_csv_rows(*b.plain));
                summary += fmt::format("{},{},{},{},{},\n", b.k_shot, b.plain->name, b.plain->runs.size(),
                                       b.plain->auc.mean, b.plain->auc.std);
                plain_text = fmt::format("{:.4f} ± {:.4f}", b.plain->auc.mean, b.plain->auc.std);
            }
            jr.push_back(std::move(entry));
            fmt::print(out, "{:>6}  {:>16}  {:>16}  {}\n", b.k_shot,
                       fmt::format("{:.4f} ± {:.4f}", b.laat.auc.mean, b.laat.auc.std), plain_text,
                       b.plain ? comparison_text(b.laat, *b.plain) : std::string("-"));
        }
        json report{{"command", stem},
                    {"model", mo.model},
                    {"gamma", mo.gamma},
                    {"runs", runs},
                    {"base_seed", seed},
                    {"zero_differences", "dropped"},
                    {"results", std::move(jr)}};
        if (bias) {
            json jrules = json::array();
            for (const auto& r : p.bias_rules) {
                jrules.push_back(rule_to_json(r));
            }
            report["rules"] = std::move(jrules);
        }
        write_json(json_path, report);
        write_text(summary_path, summary);
        write_text(runs_path, runs_csv);
        fmt::print(out, "wrote {}\n", json_path.string());
        return kOk;
    }
};

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepCommand {
    std::string kind;
    std::string values;
    DataOptions io;
    ModelOptions mo;
    std::size_t k_shot = 5;
    std::size_t runs = 20;
    bool compare_plain = true;
    std::uint64_t seed = 0;
    std::string out_dir = "laat_out";

    void add(CLI::App& app, Registry& reg) {
        reg.positional(app, "kind", kind, "gamma | estimates | noise")
            ->required()
            ->check(CLI::IsMember({"gamma", "estimates", "noise"}));
        reg.option(app, "values", values, "comma-separated sweep values (default depends on kind)");
        io.add(app, reg);
        mo.add(app, reg);
        reg.option(app, "k-shot", k_shot, "training examples per class")->check(at_least_one());
        reg.option(app, "runs", runs, "seeded runs per point")->check(at_least_one());
        reg.flag(app, "compare-plain", compare_plain, "include a plain (gamma = 0) reference report");
        reg.option(app, "seed", seed, "base seed; run i uses seed + i");
        reg.option(app, "out-dir", out_dir, "output directory");
    }

    int run(const Registry& reg, std::ostream& out) {
        if (values.empty()) {
            values = kind == "gamma" ? "0,1,10,100,250" : kind == "noise" ? "0,0.2,0.4,0.6,0.8,1" : "1,2,3,4,5";
        }
        const auto vals = parse_number_list(values, "values");
        const bool need_scores =
            kind == "gamma" ? std::any_of(vals.begin(), vals.end(), [](double g) { return g > 0.0; }) : true;
        const auto in = load_inputs(io, need_scores);
        Pipeline p;
        p.table = in.table;
        p.task = in.task;
        p.scores = in.scores;
        p.kind = parse_model_kind(mo.model);
        p.train = mo.train_config(seed);
        p.k_shot = k_shot;

        Manifest m{"sweep", reg.resolved()};
        m.input("data", io.data);
        m.input("schema", io.schema);
        m.input("scores", io.scores);
        const auto json_path = m.output(out_dir, "report", "sweep.json");
        const auto csv_path = m.output(out_dir, "points", "sweep.csv");
        const auto runs_path = m.output(out_dir, "runs", "sweep_runs.csv");
        m.write(out_dir);

        SweepReport rep = kind == "gamma"   ? gamma_sweep(p, vals, runs, seed)
                          : kind == "noise" ? noise_sweep(p, vals, runs, seed)
                                            : estimates_sweep(p, vals, runs, seed);
        std::optional<EvalReport> plain;
        if (compare_plain) {
            plain = repeat_runs(plain_baseline(p), runs, seed, fmt::format("plain-{}", mo.model));
            for (auto& [value, eval] : rep.points) {
                compare_paired(eval, *plain);
            }
        }

        json j = to_json(rep);
        j["model"] = mo.model;
        j["k_shot"] = k_shot;
        j["runs"] = runs;
        j["base_seed"] = seed;
        if (plain) {
            j["plain"] = to_json(*plain);
        }
        write_json(json_path, j);
        write_text(csv_path, to_csv(rep));
        std::string runs_csv = fmt::format("{},", rep.parameter) + runs_csv_header();
        for (const auto& [value, eval] : rep.points) {
            runs_csv += prefix_lines(fmt::format("{},", value), runs_csv_rows(eval));
        }
        if (plain) {
            runs_csv += prefix_lines(",", runs_csv_rows(*plain));
        }
        write_text(runs_path, runs_csv);

        fmt::print(out, "{:>10}  {:>16}  vs plain\n", rep.parameter, "auc");
        for (const auto& [value, eval] : rep.points) {
            fmt::print(out, "{:>10}  {:>16}  {}\n", value, fmt::format("{:.4f} ± {:.4f}", eval.auc.mean, eval.auc.std),
                       plain ? comparison_text(eval, *plain) : std::string("-"));
        }
        if (plain) {
            fmt::print(out, "{:>10}  {:>16}\n", "plain", fmt::format("{:.4f} ± {:.4f}", plain->auc.mean, plain->auc.std));
        }
        fmt::print(out, "wrote {}\n", json_path.string());
        return kOk;
    }
};

// ---------------------------------------------------------------------------
// landscape
// ---------------------------------------------------------------------------

struct LandscapeCommand {
    std::string model_file;
    DataOptions io;
    double gamma = -1.0; ///< negative: use the model's training gamma
    double half_width = 1.0;
    int resolution = 25;
    std::uint64_t seed = 0;
    std::string out_dir = "laat_out";

    void add(CLI::App& app, Registry& reg) {
        reg.option(app, "model-file", model_file, "model JSON written by `laat train`")->required();
        io.add(app, reg);
        reg.option(app, "gamma", gamma, "gamma for the train surface (negative: the model's own)");
        reg.option(app, "half-width", half_width, "grid half width in direction units")->check(CLI::PositiveNumber);
        reg.option(app, "resolution", resolution, "grid points per axis (odd)");
        reg.option(app, "seed", seed, "direction seed");
        reg.option(app, "out-dir", out_dir, "output directory");
    }

    int run(Registry& reg, std::ostream& out) {
        const auto mj = read_json_file(model_file);
        const auto model = model_from_json(mj);
        if (!mj.contains("encoder") || !mj.contains("split")) {
            throw DataError(fmt::format("'{}' lacks encoder/split information; retrain with `laat train`", model_file));
        }
        if (gamma < 0.0) {
            gamma = model.config.gamma;
        }
        const auto in = load_inputs(io, gamma > 0.0);
        const auto& split_info = mj.at("split");
        if (split_info.contains("data_sha256") && split_info.at("data_sha256").get<std::string>() != sha256_file(io.data)) {
            throw DataError(fmt::format("'{}' is not the dataset the model was trained on", io.data));
        }
        const auto enc = mj.at("encoder").get<Encoder>();
        if (enc.width() != model.params.input_dim()) {
            throw DataError("model encoder width differs from the parameter shape");
        }

        Manifest m{"landscape", reg.resolved()};
        m.input("model-file", model_file);
        m.input("data", io.data);
        m.input("schema", io.schema);
        m.input("scores", io.scores);
        const auto grid_path = m.output(out_dir, "grid", "landscape_grid.csv");
        const auto traj_path = m.output(out_dir, "trajectory", "landscape_trajectory.csv");
        m.write(out_dir);

        const auto& table = *in.table;
        const auto split = kshot_indices(table.labels, split_info.at("k_shot").get<std::size_t>(),
                                         split_info.at("seed").get<std::uint64_t>());
        const auto train_data = transform(enc, table.subset(split.train));
        const auto test_data = transform(enc, table.subset(split.test));
        const std::vector<double> scores = in.scores ? in.scores->values : std::vector<double>{};

        const auto plan = plan_landscape(model, seed, half_width, resolution, gamma);
        const auto grid = evaluate_grid(plan, train_data, test_data, gamma > 0.0 ? std::span<const double>(scores)
                                                                                 : std::span<const double>{});
        write_text(grid_path, grid_csv(grid));
        write_text(traj_path, trajectory_csv(grid));

        const int mid = (resolution - 1) / 2;
        fmt::print(out, "grid: {0}x{0}  half width: {1}  gamma: {2}\n", resolution, half_width, gamma);
        fmt::print(out, "center train loss: {:.6f}  center test loss: {:.6f}\n", grid.train_at(mid, mid),
                   grid.test_at(mid, mid));
        fmt::print(out, "trajectory points: {}\n", grid.trajectory.size());
        fmt::print(out, "wrote {}\n", grid_path.string());
        return kOk;
    }
};

// ---------------------------------------------------------------------------
// cache
// ---------------------------------------------------------------------------

struct CacheCommand {
    std::string action;
    std::string cache_dir = ScoreCache::default_dir().string();

    void add(CLI::App& app, Registry& reg) {
        reg.positional(app, "action", action, "list | clear")->required()->check(CLI::IsMember({"list", "clear"}));
        reg.option(app, "cache-dir", cache_dir, "score cache directory ($LAAT_CACHE_DIR)");
    }

    int run(std::ostream& out, std::ostream& err) const {
        ScoreCache cache(cache_dir);
        if (action == "clear") {
            fmt::print(out, "removed {} entries from {}\n", cache.clear(), cache_dir);
            return kOk;
        }
        int code = kOk;
        const auto entries = cache.entries();
        for (const auto& p : entries) {
            try {
                const auto s = ScoreCache::read_entry(p);
                fmt::print(out, "{}  model={}  estimates={}  columns={}  prompt={}\n", p.filename().string(), s.model,
                           s.n_estimates, s.size(), s.prompt_hash.substr(0, 12));
            } catch (const CacheError& e) {
                fmt::print(err, "laat: {}\n", e.what());
                code = kCacheFailure;
            }
        }
        fmt::print(out, "{} entries in {}\n", entries.size(), cache_dir);
        return code;
    }
};

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

namespace detail {

inline std::string config_value(const json& v) {
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_boolean()) {
        return v.get<bool>() ? "true" : "false";
    }
    if (v.is_number_integer() || v.is_number_unsigned()) {
        return v.dump();
    }
    if (v.is_number_float()) {
        return fmt::format("{}", v.get<double>());
    }
    if (v.is_array()) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            s += (i > 0 ? "," : "") + config_value(v[i]);
        }
        return s;
    }
    throw ConfigError(fmt::format("config: unsupported value {}", v.dump()));
}

/// Splice the flags from a --config file (or a manifest) in front of the
/// command-line flags, so the command line wins under take-last semantics.
inline std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size();) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) {
                throw ConfigError("--config needs a file argument");
            }
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
            ++i;
        }
    }
    if (path.empty()) {
        return args;
    }
    json j = read_json_file(path);
    if (!j.is_object()) {
        throw ConfigError(fmt::format("config '{}' must be a JSON object", path));
    }
    std::string command;
    if (j.contains("command") && j.contains("config")) { // a run manifest
        command = j.at("command").get<std::string>();
        j = j.at("config");
    }
    static const std::vector<std::string> commands{"score", "train", "bench", "bias", "sweep", "landscape", "cache"};
    auto it = std::find_first_of(args.begin(), args.end(), commands.begin(), commands.end());
    if (it == args.end()) {
        if (command.empty()) {
            throw ConfigError("--config given without a subcommand");
        }
        args.insert(args.begin(), command);
        it = args.begin();
    }
    const auto sub = static_cast<std::size_t>(it - args.begin());
    std::vector<std::string> injected;
    for (const auto& [key, value] : j.items()) {
        if (value.is_null()) {
            continue;
        }
        injected.push_back(fmt::format("--{}={}", key, config_value(value)));
    }
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub + 1), injected.begin(), injected.end());
    return args;
}

} // namespace detail

/// Run the program with `args` (argv without the program name). Data goes to
/// `out`, diagnostics to `err`; the return value is the process exit code.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Attribution-aligned training of tabular models with LLM feature-importance priors", "laat"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");
    app.add_option("--config", "JSON file (or run manifest) supplying flags; command-line flags win");

    ScoreCommand score;
    TrainCommand trainc;
    BenchCommand bench;
    BenchCommand biasc;
    SweepCommand sweep;
    LandscapeCommand landscape;
    CacheCommand cachec;
    auto* s_score = app.add_subcommand("score", "generate and cache LLM importance scores for a schema");
    auto* s_train = app.add_subcommand("train", "train one model on a k-shot split");
    auto* s_bench = app.add_subcommand("bench", "repeated k-shot runs, LAAT vs plain, signed-rank test");
    auto* s_bias = app.add_subcommand("bias", "bench with bias rules restricting the training rows");
    auto* s_sweep = app.add_subcommand("sweep", "sweep gamma, estimate count or score noise");
    auto* s_land = app.add_subcommand("landscape", "train/test loss grids around a trained model");
    auto* s_cache = app.add_subcommand("cache", "list or clear the score cache");
    Registry r_score, r_train, r_bench, r_bias, r_sweep, r_land, r_cache;
    score.add(*s_score, r_score);
    trainc.add(*s_train, r_train);
    bench.add(*s_bench, r_bench, false);
    biasc.add(*s_bias, r_bias, true);
    sweep.add(*s_sweep, r_sweep);
    landscape.add(*s_land, r_land);
    cachec.add(*s_cache, r_cache);

    try {
        args = detail::expand_config(std::move(args));
        std::reverse(args.begin(), args.end()); // CLI11 consumes a reversed vector
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kUsage;
    } catch (const Error& e) {
        fmt::print(err, "laat: error: {}\n", e.what());
        return kUsage;
    }

    try {
        if (s_score->parsed()) return score.run(r_score, out);
        if (s_train->parsed()) return trainc.run(r_train, out);
        if (s_bench->parsed()) return bench.run(r_bench, out);
        if (s_bias->parsed()) return biasc.run(r_bias, out);
        if (s_sweep->parsed()) return sweep.run(r_sweep, out);
        if (s_land->parsed()) return landscape.run(r_land, out);
        if (s_cache->parsed()) return cachec.run(out, err);
        return kUsage;
    } catch (const ConfigError& e) {
        fmt::print(err, "laat: error: {}\n", e.what());
        return kUsage;
    } catch (const DataError& e) {
        fmt::print(err, "laat: data error: {}\n", e.what());
        return kDataFailure;
    } catch (const ProviderError& e) {
        fmt::print(err, "laat: provider error: {} [attempts: {}]\n", e.what(), e.attempts());
        return kProviderFailure;
    } catch (const CacheError& e) {
        fmt::print(err, "laat: cache error: {}\n", e.what());
        return kCacheFailure;
    } catch (const std::exception& e) {
        fmt::print(err, "laat: error: {}\n", e.what());
        return kFailure;
    }
}

inline int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(std::move(args), out, err);
}

} // namespace laat::cli
