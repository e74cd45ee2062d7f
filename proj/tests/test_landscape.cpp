#include "helpers.hpp"

#include "laat/landscape.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace laat;
using laat::testing::random_batch;

namespace {

TrainedModel trained(const EncodedDataset& data, std::span<const double> s, ModelKind kind, double gamma,
                     int epochs = 40) {
    TrainConfig cfg;
    cfg.gamma = gamma;
    cfg.epochs = epochs;
    cfg.hidden = 6;
    cfg.record_trajectory = true;
    return train(data, s, cfg, kind);
}

double norm_of(std::span<const double> v, std::size_t off, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = off; i < off + n; ++i) {
        s += v[i] * v[i];
    }
    return std::sqrt(s);
}

} // namespace

TEST(Landscape, PlanIsDeterministicAndOrthogonal) {
    std::mt19937_64 rng(51);
    const auto data = random_batch(rng, 10, 4);
    const std::vector<double> s{1.0, 2.0, -1.0, 0.5};
    for (auto kind : {ModelKind::lr, ModelKind::mlp}) {
        const auto m = trained(data, s, kind, 100.0);
        const auto a = plan_landscape(m, 3);
        const auto b = plan_landscape(m, 3);
        EXPECT_EQ(a.direction1, b.direction1);
        EXPECT_EQ(a.direction2, b.direction2);
        EXPECT_NE(plan_landscape(m, 4).direction1, a.direction1);
        const double cos = detail::dot_vec(a.direction1, a.direction2) /
                           std::sqrt(detail::dot_vec(a.direction1, a.direction1) *
                                     detail::dot_vec(a.direction2, a.direction2));
        EXPECT_LE(std::abs(cos), 1e-10);
    }
}

TEST(Landscape, FirstDirectionIsFilterNormalized) {
    std::mt19937_64 rng(52);
    const auto data = random_batch(rng, 10, 4);
    const std::vector<double> s{1.0, 2.0, -1.0, 0.5};
    const auto m = trained(data, s, ModelKind::mlp, 100.0);
    const auto plan = plan_landscape(m, 1);
    const auto c = m.params.values();
    for (const auto& blk : m.params.blocks()) {
        EXPECT_NEAR(norm_of(plan.direction1, blk.offset, blk.size), norm_of(c, blk.offset, blk.size), 1e-9)
            << blk.name;
    }
}

TEST(Landscape, GridMatchesDirectEvaluation) {
    // One input feature: two parameters, so the plane spans all of parameter space.
    std::mt19937_64 rng(53);
    const auto train_data = random_batch(rng, 6, 1);
    const auto test_data = random_batch(rng, 8, 1);
    const std::vector<double> s{3.0};
    const auto m = trained(train_data, s, ModelKind::lr, 10.0);
    const auto plan = plan_landscape(m, 7, 0.5, 3, 10.0);
    const auto grid = evaluate_grid(plan, train_data, test_data, s);
    ASSERT_EQ(grid.axis, (std::vector<double>{-0.5, 0.0, 0.5}));
    const auto c = m.params.values();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            auto p = ModelParams::zeros(ModelKind::lr, 1, 0);
            for (std::size_t k = 0; k < 2; ++k) {
                p.values()[k] = c[k] + grid.axis[static_cast<std::size_t>(i)] * plan.direction1[k] +
                                grid.axis[static_cast<std::size_t>(j)] * plan.direction2[k];
            }
            EXPECT_NEAR(grid.train_at(i, j), laat_loss(p, train_data, s, 10.0).total, 1e-12);
            EXPECT_NEAR(grid.test_at(i, j), laat_loss(p, test_data, {}, 0.0).total, 1e-12);
        }
    }
    EXPECT_EQ(grid.train_at(1, 1), laat_loss(m.params, train_data, s, 10.0).total);
    // Every trajectory point lies in the plane here, so projection reconstructs it.
    for (std::size_t t = 0; t < m.trajectory.size(); t += 10) {
        const auto [a, b] = grid.trajectory[t];
        for (std::size_t k = 0; k < 2; ++k) {
            EXPECT_NEAR(c[k] + a * plan.direction1[k] + b * plan.direction2[k], m.trajectory[t][k], 1e-9);
        }
    }
}

TEST(Landscape, TrajectoryEndsAtOrigin) {
    std::mt19937_64 rng(54);
    const auto data = random_batch(rng, 10, 3);
    const std::vector<double> s{1.0, 0.0, -2.0};
    const auto m = trained(data, s, ModelKind::mlp, 100.0);
    const auto plan = plan_landscape(m, 2, 1.0, 5, 100.0);
    const auto grid = evaluate_grid(plan, data, data, s);
    ASSERT_EQ(grid.trajectory.size(), m.trajectory.size());
    EXPECT_NEAR(grid.trajectory.back()[0], 0.0, 1e-12);
    EXPECT_NEAR(grid.trajectory.back()[1], 0.0, 1e-12);
    EXPECT_EQ(grid_csv(grid).substr(0, 32), "alpha,beta,train_loss,test_loss\n");
    const auto traj = trajectory_csv(grid);
    EXPECT_EQ(std::count(traj.begin(), traj.end(), '\n'), static_cast<long>(m.trajectory.size()) + 1);
}

TEST(Landscape, EvaluationDoesNotTouchTheModel) {
    std::mt19937_64 rng(55);
    const auto data = random_batch(rng, 10, 3);
    const std::vector<double> s{1.0, 0.0, -2.0};
    const auto m = trained(data, s, ModelKind::lr, 100.0);
    const auto before = m.params;
    const auto plan = plan_landscape(m, 2, 1.0, 5, 100.0);
    const auto g1 = evaluate_grid(plan, data, data, s);
    const auto g2 = evaluate_grid(plan, data, data, s);
    EXPECT_EQ(m.params, before);
    EXPECT_EQ(plan.center, before);
    EXPECT_EQ(g1.train_loss, g2.train_loss);
}

TEST(Landscape, TestSurfaceIgnoresGammaAndGammaZeroTrainSurfaceIsBce) {
    std::mt19937_64 rng(56);
    const auto train_data = random_batch(rng, 10, 3);
    const auto test_data = random_batch(rng, 12, 3);
    const std::vector<double> s{1.0, 0.0, -2.0};
    const auto m = trained(train_data, s, ModelKind::mlp, 100.0);
    const auto p0 = plan_landscape(m, 9, 1.0, 5, 0.0);
    const auto p1 = plan_landscape(m, 9, 1.0, 5, 100.0);
    const auto g0 = evaluate_grid(p0, train_data, test_data, s);
    const auto g1 = evaluate_grid(p1, train_data, test_data, s);
    EXPECT_EQ(g0.test_loss, g1.test_loss);
    EXPECT_EQ(g0.test_loss, evaluate_grid(p0, train_data, test_data, {}).test_loss);
    const auto gplain = evaluate_grid(p0, train_data, test_data, {});
    EXPECT_EQ(g0.train_loss, gplain.train_loss);
    for (std::size_t i = 0; i < g0.train_loss.size(); ++i) {
        EXPECT_LE(g0.train_loss[i], g1.train_loss[i] + 1e-12);
    }
}

TEST(Landscape, RejectsBadInputs) {
    std::mt19937_64 rng(57);
    const auto data = random_batch(rng, 6, 2);
    const std::vector<double> s{1.0, 1.0};
    auto m = trained(data, s, ModelKind::lr, 1.0);
    EXPECT_THROW(plan_landscape(m, 0, 1.0, 4), ConfigError);
    EXPECT_THROW(plan_landscape(m, 0, 1.0, 1), ConfigError);
    EXPECT_THROW(plan_landscape(m, 0, 0.0, 5), ConfigError);
    m.trajectory.clear();
    EXPECT_THROW(plan_landscape(m, 0), ConfigError);
}
