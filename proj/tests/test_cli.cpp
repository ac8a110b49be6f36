#include "fedsa/commands.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = FEDSA_CONFIG_DIR;

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("fedsa_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fedsa::CommandOptions options(const std::string &config, std::int64_t rounds,
                                  const std::string &sub = "out") const {
        fedsa::CommandOptions o;
        if (!config.empty())
            o.config_path = kConfigs / config;
        o.rounds = rounds;
        o.out = dir_ / sub;
        return o;
    }

    fs::path write_config(const std::string &name, const std::string &text) const {
        const auto p = dir_ / name;
        std::ofstream(p) << text;
        return p;
    }

    fs::path dir_;
    std::ostringstream out_, err_;
};

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::size_t line_count(const fs::path &p) {
    const auto text = slurp(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

int run_binary(const std::string &args) {
    const std::string cmd = std::string(FEDSA_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_F(CliTest, RunWritesOneRowPerRound) {
    const auto o = options("case1_equal.toml", 60);
    ASSERT_EQ(fedsa::cmd_run(o, out_, err_), fedsa::kExitOk) << err_.str();
    const auto table = fedsa::read_csv(o.out / "metrics.csv");
    ASSERT_EQ(table.records.size(), 61u);
    EXPECT_EQ(table.layout.clients, 10u);
    for (std::size_t r = 0; r < table.records.size(); ++r) {
        EXPECT_EQ(table.records[r].round, std::int64_t(r));
        EXPECT_EQ(table.records[r].global_step, std::int64_t(5 * r));
    }
    EXPECT_FALSE(table.records[0].delta_wbar.has_value());
    EXPECT_TRUE(fs::exists(o.out / "config.toml"));
    EXPECT_TRUE(fs::exists(o.out / "tracking.csv"));
    EXPECT_NE(out_.str().find("round 60:"), std::string::npos);
}

TEST_F(CliTest, RunsAreByteIdentical) {
    const auto a = options("case2_finite.toml", 80, "a");
    const auto b = options("case2_finite.toml", 80, "b");
    ASSERT_EQ(fedsa::cmd_run(a, out_, err_), fedsa::kExitOk);
    ASSERT_EQ(fedsa::cmd_run(b, out_, err_), fedsa::kExitOk);
    EXPECT_EQ(slurp(a.out / "metrics.csv"), slurp(b.out / "metrics.csv"));
    EXPECT_EQ(slurp(a.out / "config.toml"), slurp(b.out / "config.toml"));

    auto c = options("case2_finite.toml", 80, "c");
    c.seed = 2;
    ASSERT_EQ(fedsa::cmd_run(c, out_, err_), fedsa::kExitOk);
    EXPECT_NE(slurp(a.out / "metrics.csv"), slurp(c.out / "metrics.csv"));
}

TEST_F(CliTest, WrittenConfigReproducesTheRun) {
    const auto a = options("noise.toml", 40, "a");
    ASSERT_EQ(fedsa::cmd_run(a, out_, err_), fedsa::kExitOk);
    fedsa::CommandOptions b;
    b.config_path = a.out / "config.toml";
    b.out = dir_ / "b";
    ASSERT_EQ(fedsa::cmd_run(b, out_, err_), fedsa::kExitOk);
    EXPECT_EQ(slurp(a.out / "metrics.csv"), slurp(b.out / "metrics.csv"));
    EXPECT_EQ(slurp(a.out / "noise_summary.csv"), slurp(b.out / "noise_summary.csv"));
}

TEST_F(CliTest, UnwritableOutputFails) {
    auto o = options("case1_equal.toml", 5);
    std::ofstream(dir_ / "blocker") << "x";
    o.out = dir_ / "blocker" / "sub";
    EXPECT_EQ(fedsa::cmd_run(o, out_, err_), fedsa::kExitRuntime);
    EXPECT_NE(err_.str().find("error:"), std::string::npos);
}

TEST_F(CliTest, OutOfBandDeltaNeedsOverride) {
    const auto cfg = write_config("slow.toml", "[schedule]\nc = 0.1\ndelta = 0.5\n");
    fedsa::CommandOptions o;
    o.config_path = cfg;
    o.rounds = 10;
    o.out = dir_ / "out";
    EXPECT_EQ(fedsa::cmd_run(o, out_, err_), fedsa::kExitValidation);
    EXPECT_NE(err_.str().find("schedule.delta"), std::string::npos);
    o.unsafe_delta = true;
    EXPECT_EQ(fedsa::cmd_run(o, out_, err_), fedsa::kExitOk);
    EXPECT_NE(err_.str().find("theory-unsupported"), std::string::npos);
    EXPECT_NE(slurp(o.out / "config.toml").find("theory-unsupported"), std::string::npos);
}

TEST_F(CliTest, DivergenceKeepsPartialMetrics) {
    const auto cfg = write_config("unstable.toml", "algorithm = \"fedavg\"\n[schedule]\nconstant = 0.1\n");
    fedsa::CommandOptions o;
    o.config_path = cfg;
    o.rounds = 300;
    o.out = dir_ / "out";
    EXPECT_EQ(fedsa::cmd_run(o, out_, err_), fedsa::kExitRuntime);
    const auto table = fedsa::read_csv(o.out / "metrics.csv");
    EXPECT_GE(table.records.size(), 1u);
    EXPECT_LT(table.records.size(), 301u);
    EXPECT_NE(err_.str().find("partial metrics"), std::string::npos);
}

TEST_F(CliTest, DeltaSweepWritesFiveRunsAndIndex) {
    const auto o = options("delta_sweep.toml", 20);
    ASSERT_EQ(fedsa::cmd_sweep(o, out_, err_), fedsa::kExitOk) << err_.str();
    for (const char *v : {"0.76", "0.825", "0.9", "0.975", "1"})
        EXPECT_TRUE(fs::exists(o.out / (std::string("delta_") + v) / "metrics.csv")) << v;
    EXPECT_EQ(line_count(o.out / "sweep_index.csv"), 6u);
    EXPECT_EQ(slurp(o.out / "sweep_index.csv").rfind("param,value,csv,final_param_error,status\n", 0), 0u);
}

TEST_F(CliTest, SnrAndClientCountSweeps) {
    const auto snr = options("snr_sweep.toml", 10, "snr");
    ASSERT_EQ(fedsa::cmd_sweep(snr, out_, err_), fedsa::kExitOk) << err_.str();
    EXPECT_EQ(line_count(snr.out / "sweep_index.csv"), 6u);
    EXPECT_TRUE(fs::exists(snr.out / "snr_db_25" / "metrics.csv"));

    const auto n = options("feature_heterogeneity.toml", 10, "n");
    ASSERT_EQ(fedsa::cmd_sweep(n, out_, err_), fedsa::kExitOk) << err_.str();
    EXPECT_EQ(line_count(n.out / "sweep_index.csv"), 4u);
    // N = 10 local steps per round
    const auto rows = fedsa::read_csv(n.out / "N_10" / "metrics.csv").records;
    EXPECT_EQ(rows.back().global_step, 100);
}

TEST_F(CliTest, SweepFromCommandLine) {
    auto o = options("", 5);
    o.sweep_param = "sigma_x-set";
    o.sweep_values = "1,5;10";
    ASSERT_EQ(fedsa::cmd_sweep(o, out_, err_), fedsa::kExitOk) << err_.str();
    EXPECT_TRUE(fs::exists(o.out / "sigma_x-set_1-5" / "metrics.csv"));
    EXPECT_TRUE(fs::exists(o.out / "sigma_x-set_10" / "metrics.csv"));
    o.sweep_param = "batch";
    EXPECT_EQ(fedsa::cmd_sweep(o, out_, err_), fedsa::kExitValidation);
}

TEST_F(CliTest, CompareBaselinesWritesEightRuns) {
    const auto o = options("", 40);
    ASSERT_EQ(fedsa::cmd_compare_baselines(o, out_, err_), fedsa::kExitOk) << err_.str();
    for (const char *g : {"constant", "tapering"})
        for (const char *a : {"proposed", "fedavg", "fedprox", "fednova"})
            EXPECT_TRUE(fs::exists(o.out / (std::string(g) + "_" + a + ".csv"))) << g << a;
    EXPECT_EQ(slurp(o.out / "constant_proposed.csv"), slurp(o.out / "tapering_proposed.csv"));
    EXPECT_EQ(line_count(o.out / "baselines_summary.csv"), 9u);
}

TEST_F(CliTest, ClassifyWritesThreeRegimes) {
    const auto o = options("", 20);
    ASSERT_EQ(fedsa::cmd_classify(o, out_, err_), fedsa::kExitOk) << err_.str();
    for (const char *r : {"uniform", "finite", "vanishing"}) {
        const auto table = fedsa::read_csv(o.out / (std::string("classify_") + r + ".csv"));
        EXPECT_EQ(table.layout.kind, fedsa::TaskKind::Classification);
        EXPECT_EQ(table.records.size(), 21u);
    }
    EXPECT_EQ(line_count(o.out / "classify_summary.csv"), 4u);
}

TEST_F(CliTest, SingleClassClientsLearnTheirClass) {
    // Every client holds a single class; with one client the global model is
    // that client's model and must classify its own data perfectly.
    const auto cfg = write_config("one.toml", "clients = 1\nbatch_size = 10\n[task]\nkind = \"classification\"\n"
                                              "classes = 3\nclass_radius = 10.0\npartition = \"dominant\"\n"
                                              "dominant_fraction = 1.0\n");
    fedsa::CommandOptions o;
    o.config_path = cfg;
    o.rounds = 1;
    o.out = dir_ / "out";
    ASSERT_EQ(fedsa::cmd_run(o, out_, err_), fedsa::kExitOk) << err_.str();
    const auto table = fedsa::read_csv(o.out / "metrics.csv");
    ASSERT_EQ(table.records.size(), 2u);
    EXPECT_EQ(*table.records[1].train_acc, 1.0);
}

TEST_F(CliTest, IteratesStayBounded) {
    for (const char *name : {"case1_equal.toml", "case3_vanishing.toml", "noise.toml"}) {
        auto cfg = fedsa::load_config(kConfigs / name);
        cfg.rounds = 500;
        const auto run = fedsa::run_experiment(cfg);
        ASSERT_TRUE(run.ok()) << name;
        for (const auto &w : run.path.values)
            EXPECT_LE(w.norm(), 1e3) << name;
        EXPECT_EQ(run.path.knots, run.times) << name;
    }
}

TEST_F(CliTest, BinaryExitCodes) {
    const auto out = (dir_ / "bin").string();
    EXPECT_EQ(run_binary("run --config " + (kConfigs / "case1_equal.toml").string() +
                         " --rounds 3 --out " + out),
              0);
    EXPECT_TRUE(fs::exists(dir_ / "bin" / "metrics.csv"));
    EXPECT_EQ(run_binary(""), 1);
    EXPECT_EQ(run_binary("run --config /nonexistent.toml"), 1);
    EXPECT_EQ(run_binary("frobnicate"), 1);
    EXPECT_EQ(run_binary("run --help"), 0);
}
