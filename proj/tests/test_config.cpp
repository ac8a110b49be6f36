#include "fedsa/config.hpp"

#include <gtest/gtest.h>

#include <string>

using fedsa::ExperimentConfig;

namespace {

std::string field_of(const std::string &toml, bool unsafe = false) {
    try {
        (void)fedsa::parse_config(toml, unsafe);
    } catch (const fedsa::ValidationError &e) {
        return e.field();
    }
    return "<accepted>";
}

} // namespace

TEST(Config, EmptyFileGivesDefaults) {
    const auto cfg = fedsa::parse_config("");
    EXPECT_EQ(cfg.clients, 10);
    EXPECT_EQ(cfg.period, 5);
    EXPECT_EQ(cfg.batch_size, 50);
    EXPECT_EQ(cfg.rounds, 2000);
    EXPECT_EQ(cfg.seed, 1u);
    EXPECT_EQ(cfg.init_std, 20.0);
    ASSERT_EQ(cfg.schedules.size(), 1u);
    EXPECT_EQ(cfg.schedules[0].c, 0.1);
    EXPECT_EQ(cfg.schedules[0].delta, 0.76);
    EXPECT_FALSE(cfg.schedules[0].constant);
    EXPECT_EQ(cfg.algorithm.tag, fedsa::Algorithm::Proposed);
    ASSERT_EQ(cfg.kind(), fedsa::TaskKind::Regression);
    const auto &r = std::get<fedsa::RegressionSpec>(cfg.task);
    EXPECT_EQ(r.dim, 3);
    EXPECT_EQ(r.sigma_w, 5.0);
    EXPECT_EQ(r.sigma_x, std::vector<double>{5.0});
    EXPECT_EQ(r.snr_db, 10.0);
    EXPECT_EQ(r.n_samples, 5000);
    EXPECT_TRUE(cfg.theory_supported());
    EXPECT_EQ(cfg.client_schedules().size(), 10u);
}

TEST(Config, ClassificationDefaults) {
    const auto cfg = fedsa::parse_config("[task]\nkind = \"classification\"\n");
    ASSERT_EQ(cfg.kind(), fedsa::TaskKind::Classification);
    EXPECT_EQ(cfg.init_std, fedsa::kClassificationInitStd);
    const auto &c = std::get<fedsa::ClassificationSpec>(cfg.task);
    EXPECT_EQ(c.classes, 4);
    EXPECT_EQ(c.partition, fedsa::Partition::RareClass);
}

TEST(Config, DeltaOutsideBandNamesTheField) {
    EXPECT_EQ(field_of("[schedule]\ndelta = 0.5\n"), "schedule.delta");
    EXPECT_EQ(field_of("clients = 2\n[[schedules]]\ndelta = 0.8\n[[schedules]]\ndelta = 1.2\n"),
              "schedules[1].delta");
}

TEST(Config, UnsafeDeltaIsAcceptedButMarked) {
    const auto a = fedsa::parse_config("[schedule]\ndelta = 0.5\n", true);
    EXPECT_FALSE(a.theory_supported());
    const auto b = fedsa::parse_config("unsafe_delta = true\n[schedule]\ndelta = 0.6\n");
    EXPECT_FALSE(b.theory_supported());
    EXPECT_NE(fedsa::dump_config(b).find("theory-unsupported"), std::string::npos);
}

TEST(Config, UnknownKeysAreRejected) {
    EXPECT_EQ(field_of("roundz = 5\n"), "roundz");
    EXPECT_EQ(field_of("[schedule]\nc = 0.1\ndelt = 0.8\n"), "schedule.delt");
    EXPECT_EQ(field_of("[task]\nsigma_q = 1\n"), "task.sigma_q");
}

TEST(Config, StructuralConstraints) {
    EXPECT_EQ(field_of("aggregation_period = 1\n"), "aggregation_period");
    EXPECT_EQ(field_of("batch_size = 0\n"), "batch_size");
    EXPECT_EQ(field_of("clients = 0\n"), "clients");
    EXPECT_EQ(field_of("clients = 3\n[[schedules]]\nc = 0.1\n[[schedules]]\nc = 0.1\n"), "schedules");
    EXPECT_EQ(field_of("[schedule]\nconstant = 0.1\n"), "schedule.constant");
    EXPECT_EQ(field_of("algorithm = \"fedavg\"\nclients = 2\n[[schedules]]\nconstant = 0.1\n"
                       "[[schedules]]\nc = 0.1\n"),
              "schedules");
    EXPECT_EQ(field_of("algorithm = \"sgd\"\n"), "algorithm");
    EXPECT_EQ(field_of("fedprox_mu = 0.5\n"), "fedprox_mu");
    EXPECT_EQ(field_of("[task]\nkind = \"regression\"\nsigma_x = [1.0, 2.0]\n"), "task.sigma_x");
    EXPECT_EQ(field_of("rounds = \"many\"\n"), "rounds");
}

TEST(Config, ConstantScheduleForBaselines) {
    const auto cfg = fedsa::parse_config("algorithm = \"fedavg\"\n[schedule]\nconstant = 0.1\n");
    EXPECT_TRUE(cfg.schedules[0].constant);
    EXPECT_FALSE(cfg.client_schedules()[0].is_tapering());
    EXPECT_EQ(cfg.client_schedules()[3](1000), 0.1);
}

TEST(Config, FedProxMu) {
    const auto a = fedsa::parse_config("algorithm = \"fedprox\"\n");
    EXPECT_EQ(a.algorithm.mu, fedsa::AlgorithmVariant::kDefaultProxMu);
    const auto b = fedsa::parse_config("algorithm = \"fedprox\"\nfedprox_mu = 0.25\n");
    EXPECT_EQ(b.algorithm.mu, 0.25);
}

TEST(Config, DumpParsesBackToTheSameConfig) {
    const std::string texts[] = {
        "",
        "seed = 7\nclients = 3\n[[schedules]]\nc = 0.1\ndelta = 0.76\n[[schedules]]\nc = 0.05\n"
        "delta = 0.76\n[[schedules]]\nc = 1.0\ndelta = 1.0\n[task]\nw_true = [[1.0, 2.0, 3.0]]\n"
        "sigma_x = [1.0, 2.0, 3.0]\nsnr_db = 3.5\n[diagnostics]\ntracking_error = true\n",
        "algorithm = \"fedprox\"\nfedprox_mu = 0.3\n[schedule]\nconstant = 0.01\n",
        "[task]\nkind = \"classification\"\npartition = \"dominant\"\ndominant_fraction = 0.6\n",
        "[task]\nsigma_x_choices = [1.0, 5.0, 10.0]\n[sweep]\nparameter = \"sigma_x-set\"\n"
        "values = [[1.0], [1.0, 5.0]]\n",
        "[sweep]\nparameter = \"delta\"\nvalues = [0.76, 0.8, 1.0]\n",
    };
    for (const auto &text : texts) {
        const auto cfg = fedsa::parse_config(text);
        const auto dumped = fedsa::dump_config(cfg);
        EXPECT_EQ(fedsa::parse_config(dumped), cfg) << dumped;
        EXPECT_EQ(fedsa::dump_config(fedsa::parse_config(dumped)), dumped);
    }
}

TEST(Config, MalformedTomlIsAValidationError) {
    EXPECT_THROW(fedsa::parse_config("rounds = = 3\n"), fedsa::ValidationError);
    EXPECT_THROW(fedsa::load_config("/nonexistent/fedsa.toml"), fedsa::Error);
}
