#pragma once

#include "fedsa/config.hpp"
#include "fedsa/engine.hpp"
#include "fedsa/metrics.hpp"
#include "fedsa/ode.hpp"
#include "fedsa/regression.hpp"
#include "fedsa/softmax.hpp"

#include <cstdint>
#include <exception>
#include <optional>
#include <vector>

namespace fedsa {

/// Everything a regression run needs before the first step.
struct RegressionProblem {
    std::vector<RegressionTask<double>> tasks;
    std::vector<RegressionSource<double>> sources;
    std::vector<Vector<double>> initial;
    std::vector<StepSizeSchedule<double>> schedules;
};

RegressionProblem build_regression_problem(const ExperimentConfig &config);

struct ClassificationProblem {
    SoftmaxTask<double> task;
    std::vector<SoftmaxSource<double>> sources;
    ClassificationDataset<double> test;
    std::vector<Vector<double>> initial; // packed parameters
    std::vector<StepSizeSchedule<double>> schedules;
};

ClassificationProblem build_classification_problem(const ExperimentConfig &config);

/// Class proportions of every client under the configured partition.
std::vector<std::vector<double>> client_class_proportions(const ClassificationSpec &spec,
                                                          std::int64_t clients);

/// Limiting weights of a schedule set. Tapering schedules use the limiting
/// ratios; all-constant sets use c_i / max_j c_j.
LimitingWeights<double> schedule_weights(const std::vector<StepSizeSchedule<double>> &schedules);

struct TrackingRow {
    std::int64_t n_start = 0;
    std::int64_t m = 0;
    double t = 0.0; // T_{n_start + m}
    double error = 0.0;
};

struct RunResult {
    TaskKind kind = TaskKind::Regression;
    std::vector<MetricsRecord> records; // rounds 0..n, fewer on failure
    Vector<double> w_bar;
    std::optional<Vector<double>> w_star;
    LimitingWeights<double> weights;
    std::vector<double> times; // T_0..T_rounds
    std::vector<RegressionTask<double>> tasks;
    InterpolatedPath<double> path;
    std::vector<TrackingRow> tracking;
    std::vector<NoiseStats<double>> noise_stats;
    std::exception_ptr failure; // set when the run aborted early

    bool ok() const { return failure == nullptr; }
};

/// Runs the configured experiment. Engine failures do not propagate: the
/// records produced so far are returned with `failure` set.
RunResult run_experiment(const ExperimentConfig &config);

RunResult run_regression(const ExperimentConfig &config);
RunResult run_classification(const ExperimentConfig &config);

/// Tracking error from every `stride`-th round with the configured horizon.
std::vector<TrackingRow> tracking_rows(const RunResult &run, double horizon, std::int64_t stride,
                                       double h_max);

/// Largest tracking error over the horizon starting at round `n_start`.
double max_tracking_error(const RunResult &run, std::int64_t n_start, double horizon,
                          double h_max = 1e-2);

CsvLayout csv_layout(const ExperimentConfig &config);

} // namespace fedsa
