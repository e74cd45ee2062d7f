#pragma once

// Chat-completion backends and the two-request scoring protocol
// (reasoning generation, then strict JSON extraction).

#include "laat/error.hpp"
#include "laat/hash.hpp"
#include "laat/scorer.hpp"

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace laat {

inline constexpr const char* kApiKeyEnv = "LAAT_API_KEY";

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 1.0;

    [[nodiscard]] json to_json() const {
        json msgs = json::array();
        for (const auto& m : messages) {
            msgs.push_back({{"role", m.role}, {"content", m.content}});
        }
        return json{{"model", model}, {"messages", std::move(msgs)}, {"temperature", temperature}};
    }

    /// Key used by replay fixtures: SHA-256 of the serialized request body.
    [[nodiscard]] std::string hash() const { return sha256_hex(to_json().dump()); }
};

struct ChatReply {
    std::string content;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatReply complete(const ChatRequest& request) = 0;
    [[nodiscard]] virtual std::string id() const = 0;
};

enum class ProviderMode { live, replay };

struct ProviderConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-4o-mini";
    double temperature = 1.0;
    double extraction_temperature = 0.0;
    double timeout_seconds = 60.0;
    int retry_limit = 3;
    int retry_backoff_ms = 500;
    ProviderMode mode = ProviderMode::live;
    std::filesystem::path fixture_path;

    void validate() const {
        if (retry_limit < 0) {
            throw ConfigError("provider: retry limit must be >= 0");
        }
        if (!(timeout_seconds > 0.0)) {
            throw ConfigError("provider: timeout must be positive");
        }
        if (mode == ProviderMode::replay && fixture_path.empty()) {
            throw ConfigError("provider: replay mode requires a fixture file");
        }
    }
};

// ---------------------------------------------------------------------------
// Live HTTP backend
// ---------------------------------------------------------------------------

namespace detail {

struct SplitUrl {
    std::string scheme_host_port;
    std::string path_prefix;
};

inline SplitUrl split_base_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError(fmt::format("provider: base URL '{}' lacks a scheme", url));
    }
    const auto path_start = url.find('/', scheme_end + 3);
    SplitUrl out;
    out.scheme_host_port = url.substr(0, path_start);
    out.path_prefix = path_start == std::string::npos ? std::string{} : url.substr(path_start);
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') {
        out.path_prefix.pop_back();
    }
    return out;
}

inline ChatReply parse_chat_response(const std::string& body) {
    const auto j = json::parse(body, nullptr, false);
    if (j.is_discarded()) {
        throw ProviderError("provider: response is not valid JSON");
    }
    ChatReply reply;
    try {
        reply.content = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError(fmt::format("provider: response lacks choices[0].message.content ({})", e.what()));
    }
    if (j.contains("usage") && j["usage"].is_object()) {
        reply.prompt_tokens = j["usage"].value("prompt_tokens", 0LL);
        reply.completion_tokens = j["usage"].value("completion_tokens", 0LL);
    }
    return reply;
}

} // namespace detail

/// POST {base_url}/chat/completions with bearer auth. Transport failures,
/// 429 and 5xx responses are retried with exponential backoff.
class HttpChatBackend final : public ChatBackend {
public:
    HttpChatBackend(ProviderConfig cfg, std::string api_key)
        : cfg_(std::move(cfg)), api_key_(std::move(api_key)), url_(detail::split_base_url(cfg_.base_url)) {}

    ChatReply complete(const ChatRequest& request) override {
        httplib::Client client(url_.scheme_host_port);
        const auto timeout = std::chrono::duration<double>(cfg_.timeout_seconds);
        const auto sec = static_cast<time_t>(cfg_.timeout_seconds);
        const auto usec = static_cast<time_t>((timeout.count() - static_cast<double>(sec)) * 1e6);
        client.set_connection_timeout(sec, usec);
        client.set_read_timeout(sec, usec);
        client.set_write_timeout(sec, usec);
        const httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
        const std::string body = request.to_json().dump();
        const std::string path = url_.path_prefix + "/chat/completions";

        auto delay = std::chrono::milliseconds(cfg_.retry_backoff_ms);
        std::string last_error;
        const int attempts = cfg_.retry_limit + 1;
        for (int attempt = 1; attempt <= attempts; ++attempt) {
            auto res = client.Post(path, headers, body, "application/json");
            if (res) {
                if (res->status >= 200 && res->status < 300) {
                    return detail::parse_chat_response(res->body);
                }
                last_error = fmt::format("HTTP {}: {}", res->status, res->body.substr(0, 300));
                if (res->status != 429 && res->status < 500) {
                    throw ProviderError(fmt::format("provider: {} (after {} attempt(s))", last_error, attempt),
                                        attempt);
                }
            } else {
                last_error = fmt::format("transport error: {}", httplib::to_string(res.error()));
            }
            if (attempt < attempts) {
                std::this_thread::sleep_for(delay);
                delay *= 2;
            }
        }
        throw ProviderError(fmt::format("provider: {} (after {} attempt(s))", last_error, attempts), attempts);
    }

    [[nodiscard]] std::string id() const override { return "live:" + cfg_.base_url; }

private:
    ProviderConfig cfg_;
    std::string api_key_;
    detail::SplitUrl url_;
};

// ---------------------------------------------------------------------------
// Replay fixtures
// ---------------------------------------------------------------------------

/// Recorded replies keyed by request hash. A key may hold several replies;
/// the n-th identical request gets the n-th reply (the last one repeats).
class ReplayFixtures {
public:
    void add(const ChatRequest& request, ChatReply reply) { add(request.hash(), std::move(reply)); }

    void add(const std::string& hash, ChatReply reply) { entries_[hash].push_back(std::move(reply)); }

    [[nodiscard]] const std::vector<ChatReply>* find(const std::string& hash) const {
        auto it = entries_.find(hash);
        return it == entries_.end() ? nullptr : &it->second;
    }

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }

    [[nodiscard]] json to_json() const {
        json j = json::object();
        for (const auto& [hash, replies] : entries_) {
            auto encode = [](const ChatReply& r) {
                return json{{"content", r.content},
                            {"prompt_tokens", r.prompt_tokens},
                            {"completion_tokens", r.completion_tokens}};
            };
            if (replies.size() == 1) {
                j[hash] = encode(replies.front());
            } else {
                json arr = json::array();
                for (const auto& r : replies) {
                    arr.push_back(encode(r));
                }
                j[hash] = std::move(arr);
            }
        }
        return j;
    }

    static ReplayFixtures from_json(const json& j) {
        if (!j.is_object()) {
            throw DataError("replay fixtures: expected a JSON object keyed by request hash");
        }
        ReplayFixtures f;
        auto decode = [](const json& e) {
            ChatReply r;
            r.content = e.at("content").get<std::string>();
            r.prompt_tokens = e.value("prompt_tokens", 0LL);
            r.completion_tokens = e.value("completion_tokens", 0LL);
            return r;
        };
        try {
            for (const auto& [hash, value] : j.items()) {
                if (value.is_array()) {
                    for (const auto& e : value) {
                        f.add(hash, decode(e));
                    }
                } else {
                    f.add(hash, decode(value));
                }
            }
        } catch (const json::exception& e) {
            throw DataError(fmt::format("replay fixtures: {}", e.what()));
        }
        return f;
    }

    static ReplayFixtures load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) {
            throw DataError(fmt::format("cannot open replay fixtures '{}'", path.string()));
        }
        const auto j = json::parse(in, nullptr, false);
        if (j.is_discarded()) {
            throw DataError(fmt::format("replay fixtures '{}' are not valid JSON", path.string()));
        }
        return from_json(j);
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) {
            throw DataError(fmt::format("cannot write replay fixtures '{}'", path.string()));
        }
        out << to_json().dump(2) << '\n';
    }

private:
    std::map<std::string, std::vector<ChatReply>> entries_;
};

/// Answers requests from recorded fixtures; never touches the network.
class ReplayChatBackend final : public ChatBackend {
public:
    ReplayChatBackend(ReplayFixtures fixtures, std::string name)
        : fixtures_(std::move(fixtures)), name_(std::move(name)) {}

    ChatReply complete(const ChatRequest& request) override {
        const auto hash = request.hash();
        const auto* replies = fixtures_.find(hash);
        if (replies == nullptr || replies->empty()) {
            throw ProviderError(fmt::format("replay: no fixture for request {}", hash), 1);
        }
        auto& n = served_[hash];
        const auto& reply = (*replies)[std::min(n, replies->size() - 1)];
        ++n;
        return reply;
    }

    [[nodiscard]] std::string id() const override { return "replay:" + name_; }

private:
    ReplayFixtures fixtures_;
    std::string name_;
    std::map<std::string, std::size_t> served_;
};

/// Forwards to another backend and records every exchange as a fixture.
class RecordingChatBackend final : public ChatBackend {
public:
    explicit RecordingChatBackend(ChatBackend& inner) : inner_(inner) {}

    ChatReply complete(const ChatRequest& request) override {
        auto reply = inner_.complete(request);
        fixtures_.add(request, reply);
        return reply;
    }

    [[nodiscard]] std::string id() const override { return inner_.id(); }
    [[nodiscard]] const ReplayFixtures& fixtures() const noexcept { return fixtures_; }

private:
    ChatBackend& inner_;
    ReplayFixtures fixtures_;
};

/// Build the backend selected by `cfg`. Live mode reads the API key from
/// LAAT_API_KEY and fails before any request if it is missing.
inline std::unique_ptr<ChatBackend> make_backend(const ProviderConfig& cfg) {
    cfg.validate();
    if (cfg.mode == ProviderMode::replay) {
        return std::make_unique<ReplayChatBackend>(ReplayFixtures::load(cfg.fixture_path),
                                                   cfg.fixture_path.filename().string());
    }
    const char* key = std::getenv(kApiKeyEnv);
    if (key == nullptr || *key == '\0') {
        throw ConfigError(fmt::format("live mode requires the {} environment variable", kApiKeyEnv));
    }
    return std::make_unique<HttpChatBackend>(cfg, key);
}

// ---------------------------------------------------------------------------
// Scoring protocol
// ---------------------------------------------------------------------------

inline ChatRequest generation_request(const PromptBundle& prompt, const ProviderConfig& cfg) {
    return {cfg.model, {{"system", prompt.system}, {"user", prompt.user}}, cfg.temperature};
}

inline ChatRequest extraction_request(const PromptBundle& prompt, const std::string& generation,
                                      const ProviderConfig& cfg) {
    return {cfg.model,
            {{"system", extraction_instructions(prompt)}, {"user", generation}},
            cfg.extraction_temperature};
}

/// One score sample: generation then extraction. An invalid extraction
/// retries both requests, up to `cfg.retry_limit` extra attempts.
inline ScoreSample request_scores(const PromptBundle& prompt, const ProviderConfig& cfg, ChatBackend& backend) {
    ScoreSample sample;
    const std::size_t d = prompt.column_names.size();
    std::string last_error;
    const int attempts = cfg.retry_limit + 1;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        const auto gen = backend.complete(generation_request(prompt, cfg));
        sample.usage += {gen.prompt_tokens, gen.completion_tokens};
        const auto ext = backend.complete(extraction_request(prompt, gen.content, cfg));
        sample.usage += {ext.prompt_tokens, ext.completion_tokens};
        auto parsed = parse_score_array(ext.content, d);
        if (parsed.ok()) {
            sample.raw_text = gen.content;
            sample.extraction_text = ext.content;
            sample.scores = std::move(parsed.scores);
            sample.attempts = attempt;
            return sample;
        }
        last_error = parsed.error;
    }
    throw ProviderError(fmt::format("score extraction failed after {} attempt(s): {}", attempts, last_error),
                        attempts);
}

/// Draw `n_estimates` samples sequentially and average them.
inline ScoreVector generate_scores(const PromptBundle& prompt, const ProviderConfig& cfg, ChatBackend& backend,
                                   std::size_t n_estimates) {
    if (n_estimates == 0) {
        throw ConfigError("number of estimates must be positive");
    }
    std::vector<ScoreSample> samples;
    samples.reserve(n_estimates);
    for (std::size_t i = 0; i < n_estimates; ++i) {
        samples.push_back(request_scores(prompt, cfg, backend));
    }
    auto out = aggregate_scores(std::span<const ScoreSample>(samples));
    out.provider = backend.id();
    out.model = cfg.model;
    out.prompt_hash = prompt.hash();
    out.column_names = prompt.column_names;
    return out;
}

} // namespace laat
