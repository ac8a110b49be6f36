#include "fedsa/metrics.hpp"
#include "fedsa/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

using fedsa::Index;
using Vec = fedsa::Vector<double>;
using Sched = fedsa::StepSizeSchedule<double>;
using Task = fedsa::RegressionTask<double>;

namespace {

Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Index>(xs.size()));
    Index i = 0;
    for (double x : xs)
        v[i++] = x;
    return v;
}

fedsa::FederatedState<double> state_at(const Vec &w, std::size_t clients) {
    std::vector<Vec> init(clients, w);
    std::vector<fedsa::Rng> streams;
    for (std::size_t i = 0; i < clients; ++i)
        streams.push_back(fedsa::make_stream(1, fedsa::StreamDomain::Batches, i));
    auto state = fedsa::make_federated_state<double>(init, std::vector<Sched>(clients, Sched::tapering(0.1, 0.8)),
                                                     std::move(streams), 5,
                                                     fedsa::AlgorithmVariant::proposed());
    fedsa::aggregate(state);
    return state;
}

fedsa::MetricsRecord sample_record(std::int64_t round) {
    fedsa::MetricsRecord r;
    r.round = round;
    r.global_step = 5 * round;
    r.T_n = 0.1 * double(round) + 1.0 / 3.0;
    r.param_error = std::exp(-double(round));
    r.agg_grad_norm = 1e-300 * double(round + 1);
    r.client_grad_norms = {1.0 / 7.0, 2.5e10};
    if (round > 0)
        r.delta_wbar = std::sqrt(2.0) * double(round);
    if (round == 1)
        r.tracking_error = 0.125;
    return r;
}

} // namespace

TEST(RecordRound, ZeroAtTheOptimum) {
    const std::vector<Task> tasks{{vec({1, 2}), 2.0, 0, 1}, {vec({-3, 1}), 1.0, 0, 1}};
    const Vec p = vec({1.0, 0.5});
    const Vec w_star = fedsa::closed_form_optimum(tasks, p);
    const auto state = state_at(w_star, 2);
    const auto rec = fedsa::record_round(state, tasks, p, std::optional<Vec>(w_star),
                                         std::optional<Vec>(), 0.0);
    EXPECT_EQ(*rec.param_error, 0.0);
    EXPECT_LT(*rec.agg_grad_norm, 1e-10);
    EXPECT_FALSE(rec.delta_wbar.has_value());
    EXPECT_FALSE(rec.tracking_error.has_value());
    EXPECT_TRUE(rec.w_bar.empty());
}

TEST(RecordRound, UnchangedAggregateHasZeroDelta) {
    const std::vector<Task> tasks{{vec({1, 2}), 2.0, 0, 1}};
    const auto state = state_at(vec({0.3, -0.2}), 1);
    const auto rec = fedsa::record_round(state, tasks, vec({1}), std::optional<Vec>(),
                                         std::optional<Vec>(state.w_bar), 0.5, true);
    EXPECT_EQ(*rec.delta_wbar, 0.0);
    EXPECT_FALSE(rec.param_error.has_value());
    EXPECT_EQ(rec.w_bar, (std::vector<double>{0.3, -0.2}));
}

TEST(RecordRound, WeightedGradientNormByHand) {
    // Two full-weight clients, one at half weight, seven with zero weight.
    std::vector<Task> tasks;
    for (int i = 0; i < 10; ++i)
        tasks.push_back({vec({double(i), 1.0 - i, 0.5 * i}), 1.0 + 0.1 * i, 0, 1});
    Vec p = Vec::Zero(10);
    p[0] = 1.0;
    p[1] = 0.5;
    const Vec w = vec({0.7, -1.1, 2.0});
    const auto state = state_at(w, 10);
    const auto rec =
        fedsa::record_round(state, tasks, p, std::optional<Vec>(), std::optional<Vec>(), 1.0);

    Vec expected = Vec::Zero(3);
    for (int i = 0; i < 2; ++i) {
        const double s2 = tasks[i].sigma_x * tasks[i].sigma_x;
        expected += p[i] * 2.0 * s2 * (tasks[i].w_true - w);
    }
    expected /= 10.0;
    EXPECT_NEAR(*rec.agg_grad_norm, expected.norm(), 1e-12);
    ASSERT_EQ(rec.client_grad_norms.size(), 10u);
    const double s2 = tasks[9].sigma_x * tasks[9].sigma_x;
    EXPECT_NEAR(rec.client_grad_norms[9], (2.0 * s2 * (tasks[9].w_true - w)).norm(), 1e-12);
}

TEST(CsvLayout, RegressionAndClassificationColumns) {
    const fedsa::CsvLayout reg{fedsa::TaskKind::Regression, 3, 0};
    EXPECT_EQ(reg.header(),
              (std::vector<std::string>{"round", "global_step", "T_n", "param_error", "agg_grad_norm",
                                        "grad_norm_c1", "grad_norm_c2", "grad_norm_c3", "delta_wbar",
                                        "tracking_error"}));
    const fedsa::CsvLayout cls{fedsa::TaskKind::Classification, 0, 2};
    EXPECT_EQ(cls.header(),
              (std::vector<std::string>{"round", "global_step", "train_loss", "train_acc", "test_loss",
                                        "test_acc", "rare_class_acc", "delta_wbar", "wbar_1",
                                        "wbar_2"}));
}

TEST(Csv, ZeroRecordsIsHeaderOnly) {
    std::ostringstream out;
    fedsa::write_csv({}, fedsa::CsvLayout{fedsa::TaskKind::Regression, 2, 0}, out);
    EXPECT_EQ(out.str(),
              "round,global_step,T_n,param_error,agg_grad_norm,grad_norm_c1,grad_norm_c2,"
              "delta_wbar,tracking_error\n");
}

TEST(Csv, EmptyCellsForMissingValues) {
    std::ostringstream out;
    const std::vector<fedsa::MetricsRecord> recs{sample_record(0)};
    fedsa::write_csv(recs, fedsa::CsvLayout{fedsa::TaskKind::Regression, 2, 0}, out);
    const std::string text = out.str();
    const auto row = text.substr(text.find('\n') + 1);
    EXPECT_EQ(row.substr(row.size() - 3), ",,\n");
}

TEST(Csv, RoundTripIsExact) {
    std::vector<fedsa::MetricsRecord> recs;
    for (int r = 0; r < 6; ++r)
        recs.push_back(sample_record(r));
    recs[3].w_bar = {std::numeric_limits<double>::denorm_min(), -0.1};
    for (auto &r : recs)
        if (r.w_bar.empty())
            r.w_bar = {1.0, 2.0};
    const fedsa::CsvLayout layout{fedsa::TaskKind::Regression, 2, 2};
    std::stringstream buf;
    fedsa::write_csv(recs, layout, buf);
    const auto table = fedsa::read_csv(buf);
    EXPECT_EQ(table.layout, layout);
    ASSERT_EQ(table.records.size(), recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i)
        EXPECT_EQ(table.records[i], recs[i]) << "row " << i;
}

TEST(Csv, ClassificationRoundTrip) {
    fedsa::MetricsRecord r;
    r.round = 4;
    r.global_step = 20;
    r.train_loss = 0.693;
    r.train_acc = 0.75;
    r.test_loss = 1.25;
    r.test_acc = 0.5;
    r.rare_class_acc = 0.0;
    r.delta_wbar = 3e-5;
    const fedsa::CsvLayout layout{fedsa::TaskKind::Classification, 0, 0};
    std::stringstream buf;
    fedsa::write_csv(std::vector<fedsa::MetricsRecord>{r}, layout, buf);
    const auto table = fedsa::read_csv(buf);
    EXPECT_EQ(table.layout, layout);
    ASSERT_EQ(table.records.size(), 1u);
    EXPECT_EQ(table.records[0], r);
}

TEST(Csv, FileOutputIsByteIdentical) {
    std::vector<fedsa::MetricsRecord> recs;
    for (int r = 0; r < 4; ++r)
        recs.push_back(sample_record(r));
    const fedsa::CsvLayout layout{fedsa::TaskKind::Regression, 2, 0};
    const auto dir = std::filesystem::temp_directory_path() / "fedsa_metrics_test";
    std::filesystem::create_directories(dir);
    fedsa::write_csv(recs, layout, dir / "a.csv");
    fedsa::write_csv(recs, layout, dir / "b.csv");
    auto slurp = [](const std::filesystem::path &p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
    EXPECT_EQ(fedsa::read_csv(dir / "a.csv").records, recs);
    std::filesystem::remove_all(dir);
}

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(fedsa::format_double(0.1), "0.1");
    EXPECT_EQ(fedsa::format_double(1.0 / 3.0), "0.3333333333333333");
    EXPECT_EQ(std::stod(fedsa::format_double(1e-300)), 1e-300);
}
