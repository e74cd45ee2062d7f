#include "helpers.hpp"

#include "laat/cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

using namespace laat;
using laat::testing::read_file;
using laat::testing::TempDir;
using laat::testing::write_file;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run_cli(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

/// Small planted task with replay fixtures, written to a temp dir.
class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        SyntheticConfig sc;
        sc.rows = 300;
        sc.features = 4;
        sc.seed = 11;
        sc.spurious_group = false;
        ProviderConfig pc;
        cli::write_synthetic(dir_.path(), sc, pc, 5, 1.0);
        ::setenv("SOURCE_DATE_EPOCH", "0", 1);
    }

    [[nodiscard]] std::string p(const std::string& name) const { return (dir_ / name).string(); }

    std::vector<std::string> data_args() const { return {"--data", p("data.csv"), "--schema", p("schema.json")}; }

    Outcome score(const std::string& out_dir, std::vector<std::string> extra = {}) {
        std::vector<std::string> a{"score",     "--schema",   p("schema.json"),    "--provider", "replay",
                                   "--fixtures", p("fixtures.json"), "--cache-dir", p("cache"), "--out-dir", p(out_dir)};
        a.insert(a.end(), extra.begin(), extra.end());
        return run(a);
    }

    Outcome with_data(const std::string& cmd, std::vector<std::string> extra) {
        std::vector<std::string> a{cmd};
        const auto d = data_args();
        a.insert(a.end(), d.begin(), d.end());
        a.insert(a.end(), extra.begin(), extra.end());
        return run(a);
    }

    TempDir dir_{"cli"};
};

} // namespace

TEST_F(CliTest, ScoreReplayIsDeterministicAndCached) {
    const auto a = score("s1", {"--no-cache"});
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_TRUE(contains(a.out, "source: provider"));
    EXPECT_TRUE(contains(a.out, "estimates: 5"));
    const auto b = score("s2", {"--no-cache"});
    EXPECT_EQ(read_file(p("s1/scores.json")), read_file(p("s2/scores.json")));

    ASSERT_EQ(score("s3").code, 0);
    const auto hit = score("s4", {"--estimates", "3"});
    ASSERT_EQ(hit.code, 0) << hit.err;
    EXPECT_TRUE(contains(hit.out, "source: cache"));
    const auto j = json::parse(read_file(p("s4/scores.json")));
    EXPECT_EQ(j["samples"].size(), 3U);
}

TEST_F(CliTest, LiveScoringWithoutKeyFailsBeforeWork) {
    const char* saved = std::getenv(kApiKeyEnv);
    const std::string keep = saved ? saved : "";
    ::unsetenv(kApiKeyEnv);
    const auto r = run({"score", "--schema", p("schema.json"), "--provider", "live", "--out-dir", p("live")});
    if (saved) {
        ::setenv(kApiKeyEnv, keep.c_str(), 1);
    }
    EXPECT_EQ(r.code, cli::kUsage);
    EXPECT_TRUE(contains(r.err, kApiKeyEnv));
    EXPECT_TRUE(r.out.empty());
    EXPECT_FALSE(std::filesystem::exists(p("live")));
}

TEST_F(CliTest, ZeroEstimatesIsUsageError) {
    const auto r = score("z", {"--estimates", "0"});
    EXPECT_EQ(r.code, cli::kUsage);
    EXPECT_TRUE(contains(r.err, "at least 1"));
    EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, TrainRecordsResolvedDefaults) {
    ASSERT_EQ(score("s").code, 0);
    const auto r = with_data("train", {"--scores", p("s/scores.json"), "--out-dir", p("t")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "test ROC AUC"));
    const auto m = json::parse(read_file(p("t/manifest.json")));
    EXPECT_EQ(m["command"], "train");
    EXPECT_EQ(m["config"]["gamma"], 100.0);
    EXPECT_EQ(m["config"]["lr"], 0.01);
    EXPECT_EQ(m["config"]["epochs"], 200);
    EXPECT_EQ(m["config"]["model"], "lr");
    EXPECT_EQ(m["timestamp"], "1970-01-01T00:00:00Z");
    EXPECT_EQ(m["inputs"]["data"]["sha256"], sha256_file(p("data.csv")));
    const auto hist = read_file(p("t/history.csv"));
    EXPECT_EQ(std::count(hist.begin(), hist.end(), '\n'), 201);
}

TEST_F(CliTest, GammaRequiresScores) {
    EXPECT_EQ(with_data("train", {"--gamma", "0", "--epochs", "5", "--out-dir", p("g0")}).code, 0);
    const auto r = with_data("train", {"--out-dir", p("g100")});
    EXPECT_EQ(r.code, cli::kUsage);
    EXPECT_TRUE(contains(r.err, "--scores"));
}

TEST_F(CliTest, ScoreCountMismatchNamesBothCounts) {
    write_file(p("short.json"), score_vector_to_json(score_vector_from_values({1.0, 2.0, 3.0})).dump());
    const auto r = with_data("train", {"--scores", p("short.json"), "--out-dir", p("mm")});
    EXPECT_EQ(r.code, cli::kUsage);
    EXPECT_TRUE(contains(r.err, "3 entries")) << r.err;
    EXPECT_TRUE(contains(r.err, "4 columns")) << r.err;
}

TEST_F(CliTest, BenchWithOneRunExplainsMissingTest) {
    ASSERT_EQ(score("s").code, 0);
    const auto r = with_data("bench", {"--scores", p("s/scores.json"), "--runs", "1", "--shots", "5", "--epochs", "20",
                                       "--out-dir", p("b")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "too few nonzero differences"));
    const auto j = json::parse(read_file(p("b/bench.json")));
    EXPECT_TRUE(j.dump().find("comparison_note") != std::string::npos);
}

TEST_F(CliTest, BiasWithNoRulesMatchesBench) {
    ASSERT_EQ(score("s").code, 0);
    write_file(p("none.json"), "[]");
    const std::vector<std::string> common{"--scores", p("s/scores.json"), "--runs", "5", "--shots", "1,5", "--epochs",
                                          "30"};
    auto bench_args = common;
    bench_args.insert(bench_args.end(), {"--out-dir", p("b")});
    auto bias_args = common;
    bias_args.insert(bias_args.end(), {"--rules", p("none.json"), "--out-dir", p("bias")});
    ASSERT_EQ(with_data("bench", bench_args).code, 0);
    const auto r = with_data("bias", bias_args);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_file(p("b/bench_runs.csv")), read_file(p("bias/bias_runs.csv")));
    EXPECT_EQ(read_file(p("b/bench_summary.csv")), read_file(p("bias/bias_summary.csv")));
}

TEST_F(CliTest, BiasRemovingAllPositivesIsDataError) {
    write_file(p("all_pos.json"), R"([{"conditions": [], "label": "positive"}])");
    const auto r = with_data("bias", {"--gamma", "0", "--rules", p("all_pos.json"), "--runs", "2", "--shots", "1",
                                      "--out-dir", p("bad")});
    EXPECT_EQ(r.code, cli::kDataFailure) << r.err;
    EXPECT_TRUE(contains(r.err, "data error"));
}

TEST_F(CliTest, GammaSweepWritesOneRowPerPoint) {
    ASSERT_EQ(score("s").code, 0);
    const auto r = with_data("sweep", {"gamma", "--scores", p("s/scores.json"), "--runs", "2", "--epochs", "20",
                                       "--out-dir", p("sw")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = read_file(p("sw/sweep.csv"));
    EXPECT_EQ(csv.rfind("gamma,n_runs,auc_mean,auc_std\n", 0), 0U);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
    EXPECT_EQ(with_data("sweep", {"sideways", "--out-dir", p("sx")}).code, cli::kUsage);
}

TEST_F(CliTest, LandscapeFromTrainedModel) {
    ASSERT_EQ(score("s").code, 0);
    ASSERT_EQ(with_data("train", {"--scores", p("s/scores.json"), "--epochs", "30", "--out-dir", p("t")}).code, 0);
    const auto r = with_data("landscape", {"--scores", p("s/scores.json"), "--model-file", p("t/model.json"),
                                           "--resolution", "5", "--out-dir", p("l")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "gamma: 100"));
    const auto grid = read_file(p("l/landscape_grid.csv"));
    EXPECT_EQ(std::count(grid.begin(), grid.end(), '\n'), 26);
    const auto traj = read_file(p("l/landscape_trajectory.csv"));
    EXPECT_EQ(std::count(traj.begin(), traj.end(), '\n'), 32);

    // A different data file than the model was trained on is refused.
    auto csv = read_file(p("data.csv"));
    write_file(p("other.csv"), csv + csv.substr(csv.find('\n') + 1));
    const auto bad = run({"landscape", "--data", p("other.csv"), "--schema", p("schema.json"), "--scores",
                          p("s/scores.json"), "--model-file", p("t/model.json"), "--out-dir", p("l2")});
    EXPECT_NE(bad.code, 0);
}

TEST_F(CliTest, CacheClearOnEmptyDirectory) {
    const auto r = run({"cache", "clear", "--cache-dir", p("empty_cache")});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "removed 0 entries"));
    ASSERT_EQ(score("s").code, 0);
    EXPECT_TRUE(contains(run({"cache", "list", "--cache-dir", p("cache")}).out, "1 entries"));
}

TEST_F(CliTest, ConfigFileAndCommandLineOverride) {
    write_file(p("cfg.json"), R"({"gamma": 0, "epochs": 5, "model": "mlp", "hidden": 8})");
    auto args = data_args();
    std::vector<std::string> a{"train", "--config", p("cfg.json"), "--epochs", "7", "--out-dir", p("c")};
    a.insert(a.begin() + 1, args.begin(), args.end());
    const auto r = run(a);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = json::parse(read_file(p("c/manifest.json")));
    EXPECT_EQ(m["config"]["epochs"], 7);
    EXPECT_EQ(m["config"]["gamma"], 0.0);
    EXPECT_EQ(m["config"]["model"], "mlp");
    EXPECT_EQ(m["config"]["hidden"], 8);
}

TEST_F(CliTest, ManifestReplayReproducesModel) {
    ASSERT_EQ(score("s").code, 0);
    ASSERT_EQ(with_data("train", {"--scores", p("s/scores.json"), "--model", "mlp", "--hidden", "10", "--epochs", "15",
                                  "--seed", "4", "--out-dir", p("t1")})
                  .code,
              0);
    const auto r = run({"--config", p("t1/manifest.json"), "--out-dir", p("t2")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_file(p("t1/model.json")), read_file(p("t2/model.json")));
}

TEST_F(CliTest, UsageErrorsGoToStderrOnly) {
    for (const auto& args : std::vector<std::vector<std::string>>{
             {}, {"bogus"}, {"train"}, {"train", "--data", "x.csv", "--schema", "y.json", "--model", "tree"}}) {
        const auto r = run(args);
        EXPECT_EQ(r.code, cli::kUsage);
        EXPECT_TRUE(r.out.empty()) << r.out;
        EXPECT_FALSE(r.err.empty());
    }
    const auto missing = run({"train", "--data", p("nope.csv"), "--schema", p("schema.json"), "--gamma", "0",
                              "--out-dir", p("m")});
    EXPECT_NE(missing.code, 0);
    EXPECT_TRUE(missing.out.empty());
}
