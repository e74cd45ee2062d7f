#pragma once

// Feature-importance scoring: prompt rendering, score extraction from model
// text, aggregation of repeated estimates and noise interpolation.

#include "laat/dataset.hpp"
#include "laat/error.hpp"
#include "laat/hash.hpp"
#include "laat/random.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace laat {

inline constexpr int kMinScore = -10;
inline constexpr int kMaxScore = 10;

// ---------------------------------------------------------------------------
// Prompt
// ---------------------------------------------------------------------------

inline constexpr std::string_view kScoringSystemPrompt =
    "You are an expert at assigning importance scores to features used for a classification task. "
    "For each feature, output an integer importance score between -10 and 10. "
    "Positive scores suggest that an increase in the feature's value boosts the class probability, "
    "whereas negative scores indicate that an increase in the feature's value reduces the class probability. "
    "You have to include a score for every feature.";

inline constexpr std::string_view kScoringUserTemplate =
    "Task: {task_prompt}\n"
    "Features:\n"
    "{features_prompt}\n"
    "Output the importance scores for the class \"{label}\".\n"
    "\n"
    "Think step by step and output an integer importance score between -10 and 10 for each feature. "
    "You must specify each feature individually, in order of its appearance.";

struct PromptBundle {
    std::string system;
    std::string user;
    std::string label;
    std::vector<std::string> feature_lines; ///< one per encoded column, encoder order
    std::vector<std::string> column_names;

    [[nodiscard]] std::string hash() const {
        std::string bytes = system;
        bytes.push_back('\0');
        bytes += user;
        bytes.push_back('\0');
        bytes += label;
        return sha256_hex(bytes);
    }
};

namespace detail {

inline std::string replace_all(std::string text, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

} // namespace detail

/// Render the scoring prompt. Categorical features get one line per
/// category so each indicator column is scored on its own.
inline PromptBundle build_prompt(const TaskSpec& task, const Encoder& encoder) {
    PromptBundle p;
    p.system = std::string(kScoringSystemPrompt);
    p.label = task.positive_label;
    p.column_names = encoder.column_names;
    for (const auto& f : encoder.features) {
        if (f.schema.is_categorical()) {
            for (const auto& cat : f.schema.categories) {
                p.feature_lines.push_back(
                    fmt::format("- {}={}: {} (category: {})", f.schema.name, cat, f.schema.description, cat));
            }
        } else {
            p.feature_lines.push_back(fmt::format("- {}: {}", f.schema.name, f.schema.description));
        }
    }
    std::string features;
    for (std::size_t i = 0; i < p.feature_lines.size(); ++i) {
        if (i > 0) {
            features.push_back('\n');
        }
        features += p.feature_lines[i];
    }
    // Substitute {features_prompt} last so braces inside descriptions survive.
    std::string user = std::string(kScoringUserTemplate);
    user = detail::replace_all(std::move(user), "{task_prompt}", "\x01T");
    user = detail::replace_all(std::move(user), "{label}", "\x01L");
    user = detail::replace_all(std::move(user), "{features_prompt}", "\x01F");
    user = detail::replace_all(std::move(user), "\x01T", task.task_description);
    user = detail::replace_all(std::move(user), "\x01L", task.positive_label);
    user = detail::replace_all(std::move(user), "\x01F", features);
    p.user = std::move(user);
    return p;
}

/// Instructions for the second pass that turns free-form reasoning into a
/// bare JSON array.
inline std::string extraction_instructions(const PromptBundle& prompt) {
    std::string names;
    for (std::size_t i = 0; i < prompt.column_names.size(); ++i) {
        names += fmt::format("{}. {}\n", i + 1, prompt.column_names[i]);
    }
    return fmt::format(
        "Extract the integer importance scores assigned to the following {} features, in this exact order:\n"
        "{}\n"
        "Respond with ONLY a JSON array of {} integers between -10 and 10, for example [3, -2, 0]. "
        "Do not add any other text.",
        prompt.column_names.size(), names, prompt.column_names.size());
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

struct ParsedScores {
    std::vector<int> scores;
    std::string error; ///< empty on success

    [[nodiscard]] bool ok() const noexcept { return error.empty(); }
};

namespace detail {

inline std::optional<std::vector<int>> as_int_array(std::string_view text) {
    const auto j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_array()) {
        return std::nullopt;
    }
    std::vector<int> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (v.is_number_integer()) {
            const auto x = v.get<long long>();
            if (x < -1000000 || x > 1000000) {
                return std::nullopt;
            }
            out.push_back(static_cast<int>(x));
        } else if (v.is_number_float()) {
            const double x = v.get<double>();
            if (!std::isfinite(x) || std::floor(x) != x || std::abs(x) > 1e6) {
                return std::nullopt;
            }
            out.push_back(static_cast<int>(x));
        } else {
            return std::nullopt;
        }
    }
    return out;
}

} // namespace detail

/// Extract an integer score array from model text. Accepts a bare JSON
/// array, or falls back to the last bracketed integer array in the text
/// (prose, fenced code blocks). Validates length and range.
inline ParsedScores parse_score_array(std::string_view text, std::size_t expected) {
    ParsedScores out;
    std::optional<std::vector<int>> found = detail::as_int_array(detail::trim(text));
    if (!found) {
        static const std::regex kBracketed(R"(\[[^\[\]]*\])");
        const std::string s(text);
        std::optional<std::vector<int>> last_any;
        for (auto it = std::sregex_iterator(s.begin(), s.end(), kBracketed); it != std::sregex_iterator(); ++it) {
            if (auto arr = detail::as_int_array(it->str())) {
                if (arr->size() == expected) {
                    found = std::move(arr);
                } else {
                    last_any = std::move(arr);
                }
            }
        }
        if (!found) {
            found = std::move(last_any);
        }
    }
    if (!found) {
        out.error = "no integer array found in extraction output";
        return out;
    }
    if (found->size() != expected) {
        out.error = fmt::format("expected {} scores, got {}", expected, found->size());
        return out;
    }
    for (std::size_t i = 0; i < found->size(); ++i) {
        const int v = (*found)[i];
        if (v < kMinScore || v > kMaxScore) {
            out.error = fmt::format("score {} at position {} is outside [{}, {}]", v, i, kMinScore, kMaxScore);
            return out;
        }
    }
    out.scores = std::move(*found);
    return out;
}

// ---------------------------------------------------------------------------
// Samples and aggregated vectors
// ---------------------------------------------------------------------------

struct TokenUsage {
    long long input_tokens = 0;
    long long output_tokens = 0;

    TokenUsage& operator+=(const TokenUsage& o) {
        input_tokens += o.input_tokens;
        output_tokens += o.output_tokens;
        return *this;
    }
    friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct ScoreSample {
    std::string raw_text;        ///< reasoning output of the generation request
    std::string extraction_text; ///< output of the extraction request
    std::vector<int> scores;
    TokenUsage usage;
    int attempts = 1;
};

/// Mean importance vector plus the integer samples it came from.
struct ScoreVector {
    std::vector<double> values;
    std::vector<std::vector<int>> samples;
    std::size_t n_estimates = 0;
    std::string provider;
    std::string model;
    std::string prompt_hash;
    std::vector<std::string> column_names;
    TokenUsage usage;

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    friend bool operator==(const ScoreVector&, const ScoreVector&) = default;
};

/// Element-wise arithmetic mean of integer score samples.
inline ScoreVector aggregate_scores(std::span<const std::vector<int>> samples) {
    if (samples.empty()) {
        throw ConfigError("aggregate_scores: no samples");
    }
    const std::size_t d = samples.front().size();
    std::vector<long long> sums(d, 0);
    for (const auto& s : samples) {
        if (s.size() != d) {
            throw ConfigError(fmt::format("aggregate_scores: sample length {} differs from {}", s.size(), d));
        }
        for (std::size_t j = 0; j < d; ++j) {
            sums[j] += s[j];
        }
    }
    ScoreVector out;
    out.values.resize(d);
    const double n = static_cast<double>(samples.size());
    for (std::size_t j = 0; j < d; ++j) {
        out.values[j] = static_cast<double>(sums[j]) / n;
    }
    out.samples.assign(samples.begin(), samples.end());
    out.n_estimates = samples.size();
    return out;
}

inline ScoreVector aggregate_scores(std::span<const ScoreSample> samples) {
    std::vector<std::vector<int>> raw;
    raw.reserve(samples.size());
    TokenUsage usage;
    for (const auto& s : samples) {
        raw.push_back(s.scores);
        usage += s.usage;
    }
    auto out = aggregate_scores(std::span<const std::vector<int>>(raw));
    out.usage = usage;
    return out;
}

/// Re-aggregate from the first `count` stored samples.
inline ScoreVector first_estimates(const ScoreVector& s, std::size_t count) {
    if (count == 0) {
        throw ConfigError("estimate count must be positive");
    }
    if (count > s.samples.size()) {
        throw ConfigError(
            fmt::format("requested {} estimates but only {} samples are available", count, s.samples.size()));
    }
    auto out = aggregate_scores(std::span<const std::vector<int>>(s.samples.data(), count));
    out.provider = s.provider;
    out.model = s.model;
    out.prompt_hash = s.prompt_hash;
    out.column_names = s.column_names;
    out.usage = s.usage;
    return out;
}

/// (1 - eps) * s + eps * noise, clamped to the score range.
inline ScoreVector perturb_with_noise(const ScoreVector& s, double epsilon, std::span<const double> noise) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw ConfigError(fmt::format("noise ratio must lie in [0, 1], got {}", epsilon));
    }
    if (noise.size() != s.size()) {
        throw ConfigError("perturb: noise length differs from score length");
    }
    ScoreVector out = s;
    out.samples.clear();
    for (std::size_t j = 0; j < s.size(); ++j) {
        const double v = (1.0 - epsilon) * s.values[j] + epsilon * noise[j];
        out.values[j] = std::clamp(v, static_cast<double>(kMinScore), static_cast<double>(kMaxScore));
    }
    return out;
}

/// Noise drawn per column from the uniform integer distribution on [-10, 10].
inline std::vector<double> draw_score_noise(std::size_t d, std::uint64_t seed) {
    auto rng = make_rng(seed, Stream::noise);
    std::uniform_int_distribution<int> dist(kMinScore, kMaxScore);
    std::vector<double> noise(d);
    for (double& v : noise) {
        v = static_cast<double>(dist(rng));
    }
    return noise;
}

inline ScoreVector perturb_scores(const ScoreVector& s, double epsilon, std::uint64_t seed) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw ConfigError(fmt::format("noise ratio must lie in [0, 1], got {}", epsilon));
    }
    return perturb_with_noise(s, epsilon, draw_score_noise(s.size(), seed));
}

/// Build a ScoreVector directly from real-valued scores (no samples).
inline ScoreVector score_vector_from_values(std::vector<double> values, std::vector<std::string> column_names = {}) {
    ScoreVector s;
    s.values = std::move(values);
    s.column_names = std::move(column_names);
    s.n_estimates = 0;
    s.provider = "manual";
    return s;
}

inline json score_vector_to_json(const ScoreVector& s) {
    return json{{"prompt_hash", s.prompt_hash},
                {"model", s.model},
                {"provider", s.provider},
                {"column_names", s.column_names},
                {"samples", s.samples},
                {"mean", s.values},
                {"n_estimates", s.n_estimates},
                {"usage", {{"input_tokens", s.usage.input_tokens}, {"output_tokens", s.usage.output_tokens}}}};
}

inline ScoreVector score_vector_from_json(const json& j) {
    ScoreVector s;
    s.prompt_hash = j.value("prompt_hash", std::string{});
    s.model = j.value("model", std::string{});
    s.provider = j.value("provider", std::string{});
    s.column_names = j.value("column_names", std::vector<std::string>{});
    s.samples = j.value("samples", std::vector<std::vector<int>>{});
    s.values = j.at("mean").get<std::vector<double>>();
    s.n_estimates = j.value("n_estimates", s.samples.size());
    if (j.contains("usage")) {
        s.usage.input_tokens = j.at("usage").value("input_tokens", 0LL);
        s.usage.output_tokens = j.at("usage").value("output_tokens", 0LL);
    }
    for (const auto& sample : s.samples) {
        if (sample.size() != s.values.size()) {
            throw DataError("scores: sample length differs from mean length");
        }
    }
    if (!s.column_names.empty() && s.column_names.size() != s.values.size()) {
        throw DataError("scores: column_names length differs from mean length");
    }
    for (double v : s.values) {
        if (!std::isfinite(v) || v < kMinScore || v > kMaxScore) {
            throw DataError(fmt::format("scores: value {} outside [-10, 10]", v));
        }
    }
    return s;
}

inline ScoreVector load_scores(const std::filesystem::path& path) {
    try {
        return score_vector_from_json(read_json_file(path));
    } catch (const json::exception& e) {
        throw DataError(fmt::format("'{}': {}", path.string(), e.what()));
    }
}

} // namespace laat
