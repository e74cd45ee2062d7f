#pragma once

#include "laat/dataset.hpp"
#include "laat/model.hpp"
#include "laat/optim.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <vector>

namespace laat {

struct TrainConfig {
    double gamma = 100.0;
    double learning_rate = 1e-2;
    int epochs = 200;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t hidden = kDefaultHidden;
    bool record_trajectory = false;

    void validate() const {
        if (!(learning_rate > 0.0)) {
            throw ConfigError("train: learning_rate must be positive");
        }
        if (epochs < 1) {
            throw ConfigError("train: epochs must be at least 1");
        }
        if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
            throw ConfigError("train: gamma must be nonnegative");
        }
    }

    [[nodiscard]] AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

struct TrainedModel {
    ModelKind kind = ModelKind::lr;
    ModelParams params;
    std::vector<LossBreakdown> history;      ///< loss at the start of each epoch
    std::vector<std::vector<double>> trajectory; ///< initial params, then params after each epoch
    TrainConfig config;
};

/// Full-batch Adam on the attribution-aligned loss. `scores` may be empty
/// only when gamma is 0.
inline TrainedModel train(const EncodedDataset& data, std::span<const double> scores, const TrainConfig& cfg,
                          ModelKind kind) {
    cfg.validate();
    if (data.size() == 0) {
        throw DataError("train: dataset is empty");
    }
    if (cfg.gamma > 0.0 && scores.empty()) {
        throw ConfigError("train: gamma > 0 requires importance scores");
    }
    TrainedModel out;
    out.kind = kind;
    out.config = cfg;
    out.params = init_params(kind, data.cols, cfg.seed, cfg.hidden);
    auto state = AdamState::zeros(out.params.size());
    const auto adam = cfg.adam();
    out.history.reserve(static_cast<std::size_t>(cfg.epochs));
    if (cfg.record_trajectory) {
        out.trajectory.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
        out.trajectory.emplace_back(out.params.values().begin(), out.params.values().end());
    }
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto lg = loss_gradients(out.params, data, scores, cfg.gamma);
        out.history.push_back(lg.loss);
        adam_step(state, out.params.values(), lg.gradient, adam);
        if (cfg.record_trajectory) {
            out.trajectory.emplace_back(out.params.values().begin(), out.params.values().end());
        }
    }
    if (!out.params.all_finite()) {
        throw Error("train: parameters diverged to non-finite values");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline json params_to_json(const ModelParams& p) {
    json j = json::object();
    if (p.kind() == ModelKind::lr) {
        const auto w = p.weights();
        j["w"] = std::vector<double>(w.begin(), w.end());
        j["b"] = p.bias();
        return j;
    }
    const auto W1 = p.hidden_weights();
    json rows = json::array();
    for (std::size_t k = 0; k < p.hidden(); ++k) {
        rows.push_back(std::vector<double>(W1.begin() + static_cast<std::ptrdiff_t>(k * p.input_dim()),
                                           W1.begin() + static_cast<std::ptrdiff_t>((k + 1) * p.input_dim())));
    }
    j["W1"] = std::move(rows);
    const auto b1 = p.hidden_bias();
    const auto w2 = p.output_weights();
    j["b1"] = std::vector<double>(b1.begin(), b1.end());
    j["w2"] = std::vector<double>(w2.begin(), w2.end());
    j["b2"] = p.output_bias();
    return j;
}

inline ModelParams params_from_json(ModelKind kind, const json& j) {
    if (kind == ModelKind::lr) {
        const auto w = j.at("w").get<std::vector<double>>();
        auto p = ModelParams::zeros(kind, w.size());
        std::copy(w.begin(), w.end(), p.weights().begin());
        p.bias() = j.at("b").get<double>();
        return p;
    }
    const auto W1 = j.at("W1").get<std::vector<std::vector<double>>>();
    if (W1.empty() || W1.front().empty()) {
        throw DataError("model: empty W1");
    }
    auto p = ModelParams::zeros(kind, W1.front().size(), W1.size());
    auto dst = p.hidden_weights();
    for (std::size_t k = 0; k < W1.size(); ++k) {
        if (W1[k].size() != p.input_dim()) {
            throw DataError("model: ragged W1");
        }
        std::copy(W1[k].begin(), W1[k].end(), dst.begin() + static_cast<std::ptrdiff_t>(k * p.input_dim()));
    }
    const auto b1 = j.at("b1").get<std::vector<double>>();
    const auto w2 = j.at("w2").get<std::vector<double>>();
    if (b1.size() != p.hidden() || w2.size() != p.hidden()) {
        throw DataError("model: hidden layer size mismatch");
    }
    std::copy(b1.begin(), b1.end(), p.hidden_bias().begin());
    std::copy(w2.begin(), w2.end(), p.output_weights().begin());
    p.output_bias() = j.at("b2").get<double>();
    return p;
}

inline json config_to_json(const TrainConfig& c) {
    return json{{"gamma", c.gamma},     {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
                {"seed", c.seed},       {"beta1", c.beta1},                 {"beta2", c.beta2},
                {"epsilon", c.epsilon}, {"hidden", c.hidden}};
}

inline TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.gamma = j.value("gamma", c.gamma);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.hidden = j.value("hidden", c.hidden);
    return c;
}

/// {"kind", "params", "config", "column_names"} plus optional extras the
/// caller merges in (encoder, split, trajectory).
inline json model_to_json(const TrainedModel& m, const std::vector<std::string>& column_names) {
    json j{{"kind", to_string(m.kind)},
           {"params", params_to_json(m.params)},
           {"config", config_to_json(m.config)},
           {"column_names", column_names}};
    if (!m.trajectory.empty()) {
        j["trajectory"] = m.trajectory;
    }
    return j;
}

inline TrainedModel model_from_json(const json& j) {
    TrainedModel m;
    try {
        m.kind = parse_model_kind(j.at("kind").get<std::string>());
        m.params = params_from_json(m.kind, j.at("params"));
        m.config = config_from_json(j.value("config", json::object()));
        if (j.contains("trajectory")) {
            m.trajectory = j.at("trajectory").get<std::vector<std::vector<double>>>();
            for (const auto& t : m.trajectory) {
                if (t.size() != m.params.size()) {
                    throw DataError("model: trajectory entry has wrong parameter count");
                }
            }
        }
    } catch (const json::exception& e) {
        throw DataError(fmt::format("model: {}", e.what()));
    }
    return m;
}

} // namespace laat
