#pragma once

// Two-dimensional loss surfaces around a trained model along random,
// filter-normalized directions, plus the training trajectory projected
// onto the same plane.

#include "laat/dataset.hpp"
#include "laat/error.hpp"
#include "laat/model.hpp"
#include "laat/random.hpp"
#include "laat/train.hpp"

#include <fmt/format.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace laat {

struct LandscapePlan {
    ModelParams center;
    std::vector<double> direction1;
    std::vector<double> direction2;
    double half_width = 1.0;
    int resolution = 25;
    double gamma = 0.0;
    std::vector<std::vector<double>> trajectory;
};

struct LandscapeGrid {
    std::vector<double> axis;
    std::vector<double> train_loss; ///< resolution x resolution, row = alpha index
    std::vector<double> test_loss;
    std::vector<std::array<double, 2>> trajectory;
    int resolution = 0;

    [[nodiscard]] double train_at(int i, int j) const { return train_loss[static_cast<std::size_t>(i * resolution + j)]; }
    [[nodiscard]] double test_at(int i, int j) const { return test_loss[static_cast<std::size_t>(i * resolution + j)]; }
};

namespace detail {

inline double dot_vec(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

/// Rescale each block of `dir` to the norm of the matching block of `center`.
inline void filter_normalize(std::vector<double>& dir, const ModelParams& center) {
    const auto theta = center.values();
    for (const auto& block : center.blocks()) {
        double dn = 0.0;
        double cn = 0.0;
        for (std::size_t i = block.offset; i < block.offset + block.size; ++i) {
            dn += dir[i] * dir[i];
            cn += theta[i] * theta[i];
        }
        dn = std::sqrt(dn);
        cn = std::sqrt(cn);
        if (cn == 0.0 || dn == 0.0) {
            continue;
        }
        const double scale = cn / dn;
        for (std::size_t i = block.offset; i < block.offset + block.size; ++i) {
            dir[i] *= scale;
        }
    }
}

} // namespace detail

inline constexpr int kMaxDirectionDraws = 64;

inline LandscapePlan plan_landscape(const TrainedModel& model, std::uint64_t seed, double half_width = 1.0,
                                    int resolution = 25, double gamma = 0.0) {
    if (model.trajectory.empty()) {
        throw ConfigError("landscape: model has no recorded trajectory (train with trajectory recording)");
    }
    if (resolution < 3 || resolution % 2 == 0) {
        throw ConfigError(fmt::format("landscape: resolution must be odd and >= 3, got {}", resolution));
    }
    if (!(half_width > 0.0)) {
        throw ConfigError("landscape: half width must be positive");
    }
    if (model.params.size() < 2) {
        throw ConfigError("landscape: need at least two parameters");
    }
    LandscapePlan plan;
    plan.center = model.params;
    plan.half_width = half_width;
    plan.resolution = resolution;
    plan.gamma = gamma;
    plan.trajectory = model.trajectory;

    auto rng = make_rng(seed, Stream::landscape);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t n = model.params.size();
    for (int draw = 0; draw < kMaxDirectionDraws; ++draw) {
        std::vector<double> d1(n);
        std::vector<double> d2(n);
        for (double& v : d1) v = gauss(rng);
        for (double& v : d2) v = gauss(rng);
        detail::filter_normalize(d1, plan.center);
        detail::filter_normalize(d2, plan.center);
        const double n11 = detail::dot_vec(d1, d1);
        const double n22 = detail::dot_vec(d2, d2);
        if (!(n11 > 0.0) || !(n22 > 0.0)) {
            continue;
        }
        const double c = detail::dot_vec(d1, d2) / n11;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] -= c * d1[i];
        }
        // Re-project once more to clean residual round-off.
        const double c2 = detail::dot_vec(d1, d2) / n11;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] -= c2 * d1[i];
        }
        if (detail::dot_vec(d2, d2) <= 1e-20 * n22) {
            continue; // parallel draw, try again
        }
        plan.direction1 = std::move(d1);
        plan.direction2 = std::move(d2);
        return plan;
    }
    throw Error("landscape: could not draw two independent directions");
}

/// Least-squares coordinates of (point - center) in span(d1, d2).
inline std::array<double, 2> project(const LandscapePlan& plan, std::span<const double> point) {
    const auto c = plan.center.values();
    std::vector<double> delta(point.size());
    for (std::size_t i = 0; i < point.size(); ++i) {
        delta[i] = point[i] - c[i];
    }
    const auto& d1 = plan.direction1;
    const auto& d2 = plan.direction2;
    const double g11 = detail::dot_vec(d1, d1);
    const double g12 = detail::dot_vec(d1, d2);
    const double g22 = detail::dot_vec(d2, d2);
    const double r1 = detail::dot_vec(d1, delta);
    const double r2 = detail::dot_vec(d2, delta);
    const double det = g11 * g22 - g12 * g12;
    return {(r1 * g22 - r2 * g12) / det, (g11 * r2 - g12 * r1) / det};
}

inline std::vector<double> axis_coordinates(double half_width, int resolution) {
    std::vector<double> axis(static_cast<std::size_t>(resolution));
    const int mid = (resolution - 1) / 2;
    for (int i = 0; i < resolution; ++i) {
        axis[static_cast<std::size_t>(i)] = half_width * static_cast<double>(i - mid) / static_cast<double>(mid);
    }
    return axis;
}

/// Train surface: loss with plan.gamma on the training data. Test surface:
/// plain cross-entropy on the test data.
inline LandscapeGrid evaluate_grid(const LandscapePlan& plan, const EncodedDataset& train, const EncodedDataset& test,
                                   std::span<const double> scores) {
    if (plan.direction1.size() != plan.center.size() || plan.direction2.size() != plan.center.size()) {
        throw ConfigError("landscape: plan directions do not match the parameter count");
    }
    LandscapeGrid grid;
    grid.resolution = plan.resolution;
    grid.axis = axis_coordinates(plan.half_width, plan.resolution);
    const auto res = static_cast<std::size_t>(plan.resolution);
    grid.train_loss.resize(res * res);
    grid.test_loss.resize(res * res);
    const std::span<const double> train_scores = plan.gamma > 0.0 ? scores : std::span<const double>{};
    ModelParams theta = plan.center;
    const auto c = plan.center.values();
    for (std::size_t i = 0; i < res; ++i) {
        for (std::size_t j = 0; j < res; ++j) {
            const double alpha = grid.axis[i];
            const double beta = grid.axis[j];
            auto t = theta.values();
            for (std::size_t p = 0; p < t.size(); ++p) {
                t[p] = c[p] + alpha * plan.direction1[p] + beta * plan.direction2[p];
            }
            grid.train_loss[i * res + j] = laat_loss(theta, train, train_scores, plan.gamma).total;
            grid.test_loss[i * res + j] = laat_loss(theta, test, {}, 0.0).total;
        }
    }
    grid.trajectory.reserve(plan.trajectory.size());
    for (const auto& point : plan.trajectory) {
        grid.trajectory.push_back(project(plan, point));
    }
    return grid;
}

inline std::string grid_csv(const LandscapeGrid& g) {
    std::string out = "alpha,beta,train_loss,test_loss\n";
    const auto res = static_cast<std::size_t>(g.resolution);
    for (std::size_t i = 0; i < res; ++i) {
        for (std::size_t j = 0; j < res; ++j) {
            out += fmt::format("{},{},{},{}\n", g.axis[i], g.axis[j], g.train_loss[i * res + j],
                               g.test_loss[i * res + j]);
        }
    }
    return out;
}

inline std::string trajectory_csv(const LandscapeGrid& g) {
    std::string out = "step,alpha,beta\n";
    for (std::size_t s = 0; s < g.trajectory.size(); ++s) {
        out += fmt::format("{},{},{}\n", s, g.trajectory[s][0], g.trajectory[s][1]);
    }
    return out;
}

} // namespace laat
