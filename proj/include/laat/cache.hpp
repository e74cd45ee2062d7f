#pragma once

#include "laat/error.hpp"
#include "laat/hash.hpp"
#include "laat/scorer.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace laat {

inline constexpr const char* kCacheDirEnv = "LAAT_CACHE_DIR";

/// One JSON file per (prompt hash, model) pair.
class ScoreCache {
public:
    explicit ScoreCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    /// $LAAT_CACHE_DIR, else ./.laat_cache
    static std::filesystem::path default_dir() {
        const char* env = std::getenv(kCacheDirEnv);
        return (env != nullptr && *env != '\0') ? std::filesystem::path(env) : std::filesystem::path(".laat_cache");
    }

    [[nodiscard]] const std::filesystem::path& dir() const noexcept { return dir_; }

    [[nodiscard]] std::filesystem::path path_for(const std::string& prompt_hash, const std::string& model) const {
        return dir_ / (sha256_hex(prompt_hash + '\n' + model) + ".json");
    }

    /// nullopt when no entry exists; CacheError when the entry is unreadable.
    [[nodiscard]] std::optional<ScoreVector> get(const std::string& prompt_hash, const std::string& model) const {
        const auto path = path_for(prompt_hash, model);
        std::error_code ec;
        if (!std::filesystem::exists(path, ec)) {
            return std::nullopt;
        }
        auto s = read_entry(path);
        if (s.prompt_hash != prompt_hash || s.model != model) {
            throw CacheError(fmt::format("cache entry '{}' belongs to a different key", path.string()));
        }
        return s;
    }

    /// Atomic write: temp file in the same directory, then rename.
    void put(const ScoreVector& s) const {
        std::filesystem::create_directories(dir_);
        const auto path = path_for(s.prompt_hash, s.model);
        std::random_device rd;
        const auto tmp = path.string() + fmt::format(".tmp{:08x}", rd());
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) {
                throw CacheError(fmt::format("cannot write cache file '{}'", tmp));
            }
            out << score_vector_to_json(s).dump(2) << '\n';
            if (!out) {
                throw CacheError(fmt::format("short write to cache file '{}'", tmp));
            }
        }
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
        if (ec) {
            std::filesystem::remove(tmp, ec);
            throw CacheError(fmt::format("cannot move cache file into place at '{}'", path.string()));
        }
    }

    [[nodiscard]] std::vector<std::filesystem::path> entries() const {
        std::vector<std::filesystem::path> out;
        std::error_code ec;
        if (!std::filesystem::is_directory(dir_, ec)) {
            return out;
        }
        for (const auto& e : std::filesystem::directory_iterator(dir_)) {
            if (e.is_regular_file() && e.path().extension() == ".json") {
                out.push_back(e.path());
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Remove every entry; returns how many were removed.
    std::size_t clear() const {
        std::size_t removed = 0;
        for (const auto& p : entries()) {
            if (std::filesystem::remove(p)) {
                ++removed;
            }
        }
        return removed;
    }

    static ScoreVector read_entry(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw CacheError(fmt::format("cannot read cache file '{}'", path.string()));
        }
        const auto j = json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw CacheError(fmt::format("corrupt cache file '{}'", path.string()));
        }
        try {
            if (!j.contains("prompt_hash") || !j.contains("model") || !j.contains("samples") || !j.contains("mean")) {
                throw CacheError(fmt::format("corrupt cache file '{}': missing fields", path.string()));
            }
            return score_vector_from_json(j);
        } catch (const json::exception& e) {
            throw CacheError(fmt::format("corrupt cache file '{}': {}", path.string(), e.what()));
        } catch (const DataError& e) {
            throw CacheError(fmt::format("corrupt cache file '{}': {}", path.string(), e.what()));
        }
    }

private:
    std::filesystem::path dir_;
};

} // namespace laat
