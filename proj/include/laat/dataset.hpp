#pragma once

// Tabular data ingestion: schema, CSV loading, one-hot/z-score encoding,
// k-shot splitting and training-set bias injection.

#include "laat/error.hpp"
#include "laat/random.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

namespace laat {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

enum class FeatureKind { numeric, categorical };

struct FeatureSchema {
    std::string name;
    std::string description;
    FeatureKind kind = FeatureKind::numeric;
    std::vector<std::string> categories; ///< ordered, only for categorical features

    [[nodiscard]] bool is_categorical() const noexcept { return kind == FeatureKind::categorical; }
};

/// Natural-language task description plus the feature schema it refers to.
struct TaskSpec {
    std::string task_description;
    std::string positive_label;
    std::string negative_label; ///< optional; empty means "the single other value"
    std::string label_column = "label";
    std::vector<FeatureSchema> features;

    [[nodiscard]] std::optional<std::size_t> find_feature(std::string_view name) const {
        for (std::size_t i = 0; i < features.size(); ++i) {
            if (features[i].name == name) {
                return i;
            }
        }
        return std::nullopt;
    }

    void validate() const {
        if (task_description.empty()) {
            throw DataError("schema: task_description must be non-empty");
        }
        if (positive_label.empty()) {
            throw DataError("schema: positive_label must be non-empty");
        }
        if (features.empty()) {
            throw DataError("schema: at least one feature is required");
        }
        std::set<std::string> names;
        for (const auto& f : features) {
            if (f.name.empty()) {
                throw DataError("schema: feature with empty name");
            }
            if (!names.insert(f.name).second) {
                throw DataError(fmt::format("schema: duplicate feature name '{}'", f.name));
            }
            if (f.name == label_column) {
                throw DataError(fmt::format("schema: feature '{}' collides with the label column", f.name));
            }
            if (f.description.empty()) {
                throw DataError(fmt::format("schema: feature '{}' has an empty description", f.name));
            }
            if (f.is_categorical()) {
                if (f.categories.empty()) {
                    throw DataError(fmt::format("schema: categorical feature '{}' has no categories", f.name));
                }
                std::set<std::string> seen(f.categories.begin(), f.categories.end());
                if (seen.size() != f.categories.size()) {
                    throw DataError(fmt::format("schema: categorical feature '{}' has duplicate categories", f.name));
                }
            }
        }
    }
};

inline void to_json(json& j, const FeatureSchema& f) {
    j = json{{"name", f.name}, {"description", f.description}};
    if (f.is_categorical()) {
        j["kind"] = json{{"categorical", f.categories}};
    } else {
        j["kind"] = "numeric";
    }
}

inline void from_json(const json& j, FeatureSchema& f) {
    f.name = j.at("name").get<std::string>();
    f.description = j.at("description").get<std::string>();
    const auto& kind = j.at("kind");
    if (kind.is_string() && kind.get<std::string>() == "numeric") {
        f.kind = FeatureKind::numeric;
        f.categories.clear();
    } else if (kind.is_object() && kind.contains("categorical")) {
        f.kind = FeatureKind::categorical;
        f.categories = kind.at("categorical").get<std::vector<std::string>>();
    } else {
        throw DataError(fmt::format("schema: feature '{}' has invalid kind {}", f.name, kind.dump()));
    }
}

inline void to_json(json& j, const TaskSpec& t) {
    j = json{{"task_description", t.task_description},
             {"positive_label", t.positive_label},
             {"label_column", t.label_column},
             {"features", t.features}};
    if (!t.negative_label.empty()) {
        j["negative_label"] = t.negative_label;
    }
}

inline void from_json(const json& j, TaskSpec& t) {
    t.task_description = j.at("task_description").get<std::string>();
    t.positive_label = j.at("positive_label").get<std::string>();
    t.negative_label = j.value("negative_label", std::string{});
    t.label_column = j.value("label_column", std::string{"label"});
    t.features = j.at("features").get<std::vector<FeatureSchema>>();
}

inline TaskSpec task_from_json(const json& j) {
    TaskSpec task;
    try {
        task = j.get<TaskSpec>();
    } catch (const json::exception& e) {
        throw DataError(fmt::format("schema: {}", e.what()));
    }
    task.validate();
    return task;
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(fmt::format("cannot open '{}'", path.string()));
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(fmt::format("'{}': invalid JSON: {}", path.string(), e.what()));
    }
}

inline TaskSpec load_task(const std::filesystem::path& path) {
    return task_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Raw table and CSV loading
// ---------------------------------------------------------------------------

/// A numeric feature value or a categorical label.
using Cell = std::variant<double, std::string>;

/// Parsed rows in schema feature order, with 0/1 labels.
struct RawTable {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::vector<int> labels;

    [[nodiscard]] std::size_t size() const noexcept { return rows.size(); }

    [[nodiscard]] std::optional<std::size_t> column_index(std::string_view name) const {
        auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) {
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - columns.begin());
    }

    [[nodiscard]] RawTable subset(std::span<const std::size_t> indices) const {
        RawTable out;
        out.columns = columns;
        out.rows.reserve(indices.size());
        out.labels.reserve(indices.size());
        for (std::size_t i : indices) {
            out.rows.push_back(rows.at(i));
            out.labels.push_back(labels.at(i));
        }
        return out;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    const auto first = s.find_first_not_of(ws);
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

/// RFC 4180 records: quoted fields, doubled quotes, CRLF or LF line ends.
/// Each record carries the 1-based line number it starts on.
struct CsvRecord {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

inline std::vector<CsvRecord> parse_csv(std::string_view text) {
    std::vector<CsvRecord> records;
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") {
        text.remove_prefix(3);
    }
    CsvRecord current;
    std::string field;
    std::size_t line = 1;
    current.line = 1;
    bool in_quotes = false;
    bool field_started = false;
    bool record_has_content = false;

    auto end_field = [&] {
        current.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        if (record_has_content || current.fields.size() > 1 || !current.fields.front().empty()) {
            records.push_back(std::move(current));
        }
        current = CsvRecord{};
        record_has_content = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') {
                    ++line;
                }
                field.push_back(c);
            }
            continue;
        }
        if (current.line == 0) {
            current.line = line;
        }
        switch (c) {
        case '"':
            if (!field_started || trim(field).empty()) {
                field.clear();
                in_quotes = true;
                field_started = true;
                record_has_content = true;
            } else {
                field.push_back(c);
            }
            break;
        case ',':
            end_field();
            record_has_content = true;
            break;
        case '\r':
            break;
        case '\n':
            end_record();
            ++line;
            current.line = line;
            break;
        default:
            field.push_back(c);
            field_started = true;
            break;
        }
    }
    if (in_quotes) {
        throw DataError(fmt::format("csv: unterminated quoted field starting near line {}", current.line));
    }
    if (field_started || !current.fields.empty() || !field.empty()) {
        end_record();
    }
    return records;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) {
        return std::nullopt;
    }
    if (s.front() == '+') {
        s.remove_prefix(1);
    }
    double value = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

} // namespace detail

/// Parse CSV text against a schema. `source` names the input in error messages.
inline RawTable parse_table(std::string_view text, const TaskSpec& task, std::string_view source = "csv") {
    const auto records = detail::parse_csv(text);
    if (records.empty()) {
        throw DataError(fmt::format("{}: empty file, expected a header row", source));
    }
    const auto& header = records.front().fields;
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < header.size(); ++i) {
        position.emplace(std::string(detail::trim(header[i])), i);
    }
    auto locate = [&](const std::string& name) {
        auto it = position.find(name);
        if (it == position.end()) {
            throw DataError(fmt::format("{}: missing column '{}'", source, name));
        }
        return it->second;
    };
    std::vector<std::size_t> feature_pos;
    feature_pos.reserve(task.features.size());
    for (const auto& f : task.features) {
        feature_pos.push_back(locate(f.name));
    }
    const std::size_t label_pos = locate(task.label_column);

    RawTable table;
    for (const auto& f : task.features) {
        table.columns.push_back(f.name);
    }
    std::string negative_seen = task.negative_label;

    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.fields.size() != header.size()) {
            throw DataError(fmt::format("{}: row {} has {} fields, header has {}", source, rec.line,
                                        rec.fields.size(), header.size()));
        }
        std::vector<Cell> row;
        row.reserve(task.features.size());
        for (std::size_t j = 0; j < task.features.size(); ++j) {
            const auto& f = task.features[j];
            const std::string_view raw = detail::trim(rec.fields[feature_pos[j]]);
            if (raw.empty()) {
                throw DataError(fmt::format("{}: missing value at (row {}, \"{}\")", source, rec.line, f.name));
            }
            if (f.is_categorical()) {
                if (std::find(f.categories.begin(), f.categories.end(), raw) == f.categories.end()) {
                    throw DataError(fmt::format("{}: unknown category '{}' at (row {}, \"{}\")", source, raw,
                                                rec.line, f.name));
                }
                row.emplace_back(std::string(raw));
            } else {
                auto value = detail::parse_double(raw);
                if (!value) {
                    throw DataError(fmt::format("{}: unparseable numeric value '{}' at (row {}, \"{}\")", source,
                                                raw, rec.line, f.name));
                }
                row.emplace_back(*value);
            }
        }
        const std::string label(detail::trim(rec.fields[label_pos]));
        int y = 0;
        if (label == task.positive_label) {
            y = 1;
        } else if (!label.empty() && negative_seen.empty()) {
            negative_seen = label;
        } else if (label.empty() || label != negative_seen) {
            throw DataError(fmt::format("{}: unknown label value '{}' at (row {}, \"{}\")", source, label,
                                        rec.line, task.label_column));
        }
        table.rows.push_back(std::move(row));
        table.labels.push_back(y);
    }
    return table;
}

inline RawTable load_csv(const std::filesystem::path& path, const TaskSpec& task) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(fmt::format("cannot open '{}'", path.string()));
    }
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_table(text, task, path.string());
}

inline RawTable load_csv(const std::filesystem::path& path, TaskSpec task, const std::string& label_column) {
    task.label_column = label_column;
    return load_csv(path, task);
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

/// Standardized numeric matrix (row-major) with 0/1 labels.
struct EncodedDataset {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> X;
    std::vector<int> y;
    std::vector<std::string> column_names;

    [[nodiscard]] std::size_t size() const noexcept { return rows; }

    [[nodiscard]] std::span<const double> row(std::size_t i) const { return {X.data() + i * cols, cols}; }

    [[nodiscard]] std::span<const int> labels() const noexcept { return y; }

    [[nodiscard]] EncodedDataset subset(std::span<const std::size_t> indices) const {
        EncodedDataset out;
        out.rows = indices.size();
        out.cols = cols;
        out.column_names = column_names;
        out.X.reserve(out.rows * cols);
        out.y.reserve(out.rows);
        for (std::size_t i : indices) {
            auto r = row(i);
            out.X.insert(out.X.end(), r.begin(), r.end());
            out.y.push_back(y.at(i));
        }
        return out;
    }
};

/// Fitted per-feature encoding: z-score statistics for numeric features,
/// a contiguous indicator block for categorical ones.
struct Encoder {
    struct Feature {
        FeatureSchema schema;
        std::size_t first_column = 0;
        double mean = 0.0;
        double std = 1.0;

        [[nodiscard]] std::size_t width() const noexcept {
            return schema.is_categorical() ? schema.categories.size() : 1;
        }
    };

    std::vector<Feature> features;
    std::vector<std::string> column_names;

    [[nodiscard]] std::size_t width() const noexcept { return column_names.size(); }
};

namespace detail {

inline Encoder encoder_layout(const TaskSpec& task) {
    Encoder enc;
    for (const auto& f : task.features) {
        Encoder::Feature ef;
        ef.schema = f;
        ef.first_column = enc.column_names.size();
        if (f.is_categorical()) {
            for (const auto& c : f.categories) {
                enc.column_names.push_back(f.name + "=" + c);
            }
        } else {
            enc.column_names.push_back(f.name);
        }
        enc.features.push_back(std::move(ef));
    }
    return enc;
}

} // namespace detail

/// Population standard deviations below this fraction of max(1, |mean|)
/// are treated as a constant column and replaced by 1.
inline constexpr double kDegenerateStdTolerance = 1e-12;

inline Encoder fit_encoder(const RawTable& table, const TaskSpec& task) {
    if (table.size() == 0) {
        throw DataError("fit_encoder: table is empty");
    }
    Encoder enc = detail::encoder_layout(task);
    for (std::size_t j = 0; j < enc.features.size(); ++j) {
        auto& f = enc.features[j];
        if (f.schema.is_categorical()) {
            continue;
        }
        const auto n = static_cast<double>(table.size());
        double sum = 0.0;
        for (const auto& row : table.rows) {
            sum += std::get<double>(row[j]);
        }
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& row : table.rows) {
            const double dev = std::get<double>(row[j]) - mean;
            ss += dev * dev;
        }
        const double sd = std::sqrt(ss / n);
        f.mean = mean;
        f.std = sd > kDegenerateStdTolerance * std::max(1.0, std::abs(mean)) ? sd : 1.0;
    }
    return enc;
}

inline EncodedDataset transform(const Encoder& enc, const RawTable& table) {
    EncodedDataset out;
    out.rows = table.size();
    out.cols = enc.width();
    out.column_names = enc.column_names;
    out.X.assign(out.rows * out.cols, 0.0);
    out.y = table.labels;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& row = table.rows[i];
        if (row.size() != enc.features.size()) {
            throw DataError(fmt::format("transform: row {} has {} cells, encoder expects {}", i, row.size(),
                                        enc.features.size()));
        }
        double* dst = out.X.data() + i * out.cols;
        for (std::size_t j = 0; j < enc.features.size(); ++j) {
            const auto& f = enc.features[j];
            if (f.schema.is_categorical()) {
                const auto* cat = std::get_if<std::string>(&row[j]);
                if (cat == nullptr) {
                    throw DataError(fmt::format("transform: numeric cell in categorical feature '{}'", f.schema.name));
                }
                const auto& cats = f.schema.categories;
                auto it = std::find(cats.begin(), cats.end(), *cat);
                if (it == cats.end()) {
                    throw DataError(fmt::format("transform: category '{}' not in schema for feature '{}'", *cat,
                                                f.schema.name));
                }
                dst[f.first_column + static_cast<std::size_t>(it - cats.begin())] = 1.0;
            } else {
                const auto* v = std::get_if<double>(&row[j]);
                if (v == nullptr) {
                    throw DataError(fmt::format("transform: text cell in numeric feature '{}'", f.schema.name));
                }
                dst[f.first_column] = (*v - f.mean) / f.std;
            }
        }
    }
    return out;
}

inline void to_json(json& j, const Encoder& enc) {
    j = json::object();
    j["column_names"] = enc.column_names;
    json feats = json::array();
    for (const auto& f : enc.features) {
        json jf{{"schema", f.schema}, {"first_column", f.first_column}};
        if (!f.schema.is_categorical()) {
            jf["mean"] = f.mean;
            jf["std"] = f.std;
        }
        feats.push_back(std::move(jf));
    }
    j["features"] = std::move(feats);
}

inline void from_json(const json& j, Encoder& enc) {
    enc.column_names = j.at("column_names").get<std::vector<std::string>>();
    enc.features.clear();
    for (const auto& jf : j.at("features")) {
        Encoder::Feature f;
        f.schema = jf.at("schema").get<FeatureSchema>();
        f.first_column = jf.at("first_column").get<std::size_t>();
        f.mean = jf.value("mean", 0.0);
        f.std = jf.value("std", 1.0);
        enc.features.push_back(std::move(f));
    }
}

// ---------------------------------------------------------------------------
// k-shot splits
// ---------------------------------------------------------------------------

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Draw `k` rows per class uniformly without replacement for training; all
/// other rows form the test set. Rows with `train_eligible[i] == false` are
/// never drawn for training but still land in the test set.
inline SplitIndices kshot_indices(std::span<const int> labels, std::size_t k, std::uint64_t seed,
                                  const std::vector<bool>& train_eligible = {}) {
    if (k == 0) {
        throw ConfigError("kshot_split: k must be positive");
    }
    if (!train_eligible.empty() && train_eligible.size() != labels.size()) {
        throw ConfigError("kshot_split: eligibility mask length mismatch");
    }
    auto rng = make_rng(seed, Stream::split);
    std::vector<bool> in_train(labels.size(), false);
    for (int cls : {0, 1}) {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == cls && (train_eligible.empty() || train_eligible[i])) {
                pool.push_back(i);
            }
        }
        if (pool.size() < k) {
            throw DataError(fmt::format("kshot_split: class {} has {} eligible rows, need k = {}", cls,
                                        pool.size(), k));
        }
        std::vector<std::size_t> picked;
        picked.reserve(k);
        std::sample(pool.begin(), pool.end(), std::back_inserter(picked), k, rng);
        for (std::size_t i : picked) {
            in_train[i] = true;
        }
    }
    SplitIndices split;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        (in_train[i] ? split.train : split.test).push_back(i);
    }
    return split;
}

template <class Table>
concept LabeledTable = requires(const Table& t, std::span<const std::size_t> idx) {
    { t.subset(idx) } -> std::same_as<Table>;
    t.size();
};

inline std::span<const int> labels_of(const RawTable& t) { return t.labels; }
inline std::span<const int> labels_of(const EncodedDataset& d) { return d.y; }

/// Split into (train, test) with k examples per class in train.
template <LabeledTable Table>
std::pair<Table, Table> kshot_split(const Table& data, std::size_t k, std::uint64_t seed) {
    const auto split = kshot_indices(labels_of(data), k, seed);
    return {data.subset(split.train), data.subset(split.test)};
}

// ---------------------------------------------------------------------------
// Bias rules
// ---------------------------------------------------------------------------

enum class Comparator { lt, le, gt, ge, eq, ne };
enum class LabelCondition { positive, negative, any };

struct Condition {
    std::string feature;
    Comparator op = Comparator::eq;
    Cell value;
};

/// Exclude rows matching every condition and the label condition.
struct BiasRule {
    std::vector<Condition> conditions;
    LabelCondition label = LabelCondition::any;
};

inline Comparator parse_comparator(std::string_view s) {
    if (s == "<") return Comparator::lt;
    if (s == "<=" || s == "≤") return Comparator::le;
    if (s == ">") return Comparator::gt;
    if (s == ">=" || s == "≥") return Comparator::ge;
    if (s == "=" || s == "==") return Comparator::eq;
    if (s == "!=" || s == "≠") return Comparator::ne;
    throw DataError(fmt::format("bias rule: unknown comparator '{}'", s));
}

inline std::string_view comparator_text(Comparator op) {
    switch (op) {
    case Comparator::lt: return "<";
    case Comparator::le: return "<=";
    case Comparator::gt: return ">";
    case Comparator::ge: return ">=";
    case Comparator::eq: return "=";
    case Comparator::ne: return "!=";
    }
    return "?";
}

inline void validate_rule(const BiasRule& rule, const TaskSpec& task) {
    for (const auto& c : rule.conditions) {
        auto idx = task.find_feature(c.feature);
        if (!idx) {
            throw DataError(fmt::format("bias rule: unknown feature '{}'", c.feature));
        }
        const auto& f = task.features[*idx];
        if (f.is_categorical()) {
            if (c.op != Comparator::eq && c.op != Comparator::ne) {
                throw DataError(fmt::format("bias rule: comparator '{}' not allowed on categorical feature '{}'",
                                            comparator_text(c.op), f.name));
            }
            const auto* v = std::get_if<std::string>(&c.value);
            if (v == nullptr) {
                throw DataError(fmt::format("bias rule: categorical feature '{}' needs a text value", f.name));
            }
            if (std::find(f.categories.begin(), f.categories.end(), *v) == f.categories.end()) {
                throw DataError(fmt::format("bias rule: '{}' is not a category of '{}'", *v, f.name));
            }
        } else if (!std::holds_alternative<double>(c.value)) {
            throw DataError(fmt::format("bias rule: numeric feature '{}' needs a numeric value", f.name));
        }
    }
}

inline BiasRule rule_from_json(const json& j) {
    BiasRule rule;
    try {
        for (const auto& jc : j.at("conditions")) {
            Condition c;
            c.feature = jc.at("feature").get<std::string>();
            c.op = parse_comparator(jc.at("op").get<std::string>());
            const auto& v = jc.at("value");
            if (v.is_number()) {
                c.value = v.get<double>();
            } else if (v.is_string()) {
                c.value = v.get<std::string>();
            } else {
                throw DataError(fmt::format("bias rule: value for '{}' must be a number or string", c.feature));
            }
            rule.conditions.push_back(std::move(c));
        }
        const auto label = j.value("label", std::string{"any"});
        if (label == "positive") {
            rule.label = LabelCondition::positive;
        } else if (label == "negative") {
            rule.label = LabelCondition::negative;
        } else if (label == "any") {
            rule.label = LabelCondition::any;
        } else {
            throw DataError(fmt::format("bias rule: unknown label condition '{}'", label));
        }
    } catch (const json::exception& e) {
        throw DataError(fmt::format("bias rule: {}", e.what()));
    }
    return rule;
}

inline json rule_to_json(const BiasRule& rule) {
    json conds = json::array();
    for (const auto& c : rule.conditions) {
        json jc{{"feature", c.feature}, {"op", comparator_text(c.op)}};
        std::visit([&](const auto& v) { jc["value"] = v; }, c.value);
        conds.push_back(std::move(jc));
    }
    const char* label = rule.label == LabelCondition::positive   ? "positive"
                        : rule.label == LabelCondition::negative ? "negative"
                                                                 : "any";
    return json{{"conditions", std::move(conds)}, {"label", label}};
}

inline std::vector<BiasRule> rules_from_json(const json& j, const TaskSpec& task) {
    if (!j.is_array()) {
        throw DataError("bias rules: expected a JSON list");
    }
    std::vector<BiasRule> rules;
    for (const auto& jr : j) {
        rules.push_back(rule_from_json(jr));
        validate_rule(rules.back(), task);
    }
    return rules;
}

inline std::vector<BiasRule> load_bias_rules(const std::filesystem::path& path, const TaskSpec& task) {
    return rules_from_json(read_json_file(path), task);
}

namespace detail {

inline bool compare(const Cell& cell, Comparator op, const Cell& value) {
    if (const auto* a = std::get_if<double>(&cell)) {
        const auto* b = std::get_if<double>(&value);
        if (b == nullptr) {
            throw DataError("bias rule: numeric cell compared against a text value");
        }
        switch (op) {
        case Comparator::lt: return *a < *b;
        case Comparator::le: return *a <= *b;
        case Comparator::gt: return *a > *b;
        case Comparator::ge: return *a >= *b;
        case Comparator::eq: return *a == *b;
        case Comparator::ne: return *a != *b;
        }
    }
    const auto& a = std::get<std::string>(cell);
    const auto* b = std::get_if<std::string>(&value);
    if (b == nullptr) {
        throw DataError("bias rule: text cell compared against a numeric value");
    }
    switch (op) {
    case Comparator::eq: return a == *b;
    case Comparator::ne: return a != *b;
    default: throw DataError("bias rule: ordering comparator applied to a categorical value");
    }
}

} // namespace detail

/// True when row `i` is excluded by `rule`.
inline bool rule_matches(const BiasRule& rule, const RawTable& table, std::size_t i) {
    const int y = table.labels.at(i);
    if ((rule.label == LabelCondition::positive && y != 1) || (rule.label == LabelCondition::negative && y != 0)) {
        return false;
    }
    for (const auto& c : rule.conditions) {
        auto col = table.column_index(c.feature);
        if (!col) {
            throw DataError(fmt::format("bias rule: table has no column '{}'", c.feature));
        }
        if (!detail::compare(table.rows[i][*col], c.op, c.value)) {
            return false;
        }
    }
    return true;
}

/// Per-row flag: true when no rule excludes the row.
inline std::vector<bool> surviving_rows(const RawTable& table, std::span<const BiasRule> rules) {
    std::vector<bool> keep(table.size(), true);
    for (std::size_t i = 0; i < table.size(); ++i) {
        for (const auto& rule : rules) {
            if (rule_matches(rule, table, i)) {
                keep[i] = false;
                break;
            }
        }
    }
    return keep;
}

inline RawTable apply_bias_rule(const RawTable& table, const BiasRule& rule) {
    std::vector<std::size_t> survivors;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (!rule_matches(rule, table, i)) {
            survivors.push_back(i);
        }
    }
    return table.subset(survivors);
}

} // namespace laat
