#pragma once

#include "laat/dataset.hpp"
#include "laat/model.hpp"
#include "laat/random.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace laat::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / fmt::format("laat_{}_{:08x}", tag, rd());
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// age (numeric) + sex (categorical male/female), labels yes/no.
inline TaskSpec age_sex_task() {
    TaskSpec t;
    t.task_description = "Does the patient have the condition? Yes or no?";
    t.positive_label = "yes";
    t.negative_label = "no";
    t.features = {{"age", "Age in years", FeatureKind::numeric, {}},
                  {"sex", "Biological sex", FeatureKind::categorical, {"male", "female"}}};
    return t;
}

/// Random standardized-looking batch with both classes present when n >= 2.
inline EncodedDataset random_batch(std::mt19937_64& rng, std::size_t n, std::size_t d) {
    std::normal_distribution<double> g(0.0, 1.0);
    EncodedDataset b;
    b.rows = n;
    b.cols = d;
    b.X.resize(n * d);
    for (double& v : b.X) {
        v = g(rng);
    }
    for (std::size_t i = 0; i < n; ++i) {
        b.y.push_back(static_cast<int>(i % 2));
    }
    std::shuffle(b.y.begin(), b.y.end(), rng);
    return b;
}

inline ModelParams random_params(std::mt19937_64& rng, ModelKind kind, std::size_t d, std::size_t h,
                                 double scale = 0.5) {
    std::normal_distribution<double> g(0.0, scale);
    auto p = ModelParams::zeros(kind, d, h);
    for (double& v : p.values()) {
        v = g(rng);
    }
    return p;
}

} // namespace laat::testing
