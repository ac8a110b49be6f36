#pragma once

#include "fedsa/engine.hpp"
#include "fedsa/metrics.hpp"
#include "fedsa/schedules.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fedsa {

struct ScheduleSpec {
    bool constant = false;
    double c = 0.1;
    double delta = 0.76; // ignored when constant

    friend bool operator==(const ScheduleSpec &, const ScheduleSpec &) = default;
};

struct RegressionSpec {
    std::int64_t dim = 3;
    double sigma_w = 5.0;
    std::vector<std::vector<double>> w_true; // empty: sampled from N(0, sigma_w^2 I); one entry: shared
    std::vector<double> sigma_x{5.0};        // one entry: shared; otherwise one per client
    std::vector<double> sigma_x_choices;     // nonempty: each client draws sigma_x from this set
    double snr_db = 10.0;
    std::int64_t n_samples = 5000;

    friend bool operator==(const RegressionSpec &, const RegressionSpec &) = default;
};

enum class Partition { RareClass, Dominant };

struct ClassificationSpec {
    std::int64_t classes = 4;
    std::int64_t dim = 2;
    double sigma_x = 1.0;
    double class_radius = 2.0;
    std::int64_t n_samples = 1000;
    std::int64_t test_samples = 4000;
    Partition partition = Partition::RareClass;
    double dominant_fraction = 0.7;
    std::int64_t rare_class = 0;

    friend bool operator==(const ClassificationSpec &, const ClassificationSpec &) = default;
};

struct Diagnostics {
    bool tracking_error = false;
    double tracking_horizon = 1.0;
    std::int64_t tracking_stride = 50;
    double ode_h_max = 1e-2;
    bool record_noise = false;
    bool dump_wbar = false;
    bool dump_dataset = false;
    bool full_batch = false;

    friend bool operator==(const Diagnostics &, const Diagnostics &) = default;
};

struct SweepSpec {
    std::string parameter; // delta | snr_db | N | sigma_w | sigma_x-set
    std::vector<std::vector<double>> values;

    friend bool operator==(const SweepSpec &, const SweepSpec &) = default;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::int64_t clients = 10;            // L
    std::int64_t period = 5;              // N
    std::int64_t batch_size = 50;         // m
    std::int64_t rounds = 2000;
    AlgorithmVariant algorithm;
    std::vector<ScheduleSpec> schedules{ScheduleSpec{}}; // one entry: shared
    std::variant<RegressionSpec, ClassificationSpec> task;
    double init_std = 20.0;
    Diagnostics diagnostics;
    bool unsafe_delta = false;
    std::optional<SweepSpec> sweep;

    TaskKind kind() const {
        return std::holds_alternative<RegressionSpec>(task) ? TaskKind::Regression
                                                            : TaskKind::Classification;
    }

    /// One schedule per client (shared entries expanded).
    std::vector<StepSizeSchedule<double>> client_schedules() const;

    /// False when any schedule's delta lies outside (3/4, 1].
    bool theory_supported() const;

    friend bool operator==(const ExperimentConfig &, const ExperimentConfig &) = default;
};

inline constexpr double kRegressionInitStd = 20.0;
inline constexpr double kClassificationInitStd = 0.01;

/// Parses TOML text, applies defaults and validates. `allow_unsafe_delta`
/// has the same effect as `unsafe_delta = true` in the file.
ExperimentConfig parse_config(std::string_view text, bool allow_unsafe_delta = false);

ExperimentConfig load_config(const std::filesystem::path &path, bool allow_unsafe_delta = false);

/// Throws ValidationError naming the offending field.
void validate(const ExperimentConfig &config);

/// Normalised TOML with every default spelled out; parse_config(dump) == config.
std::string dump_config(const ExperimentConfig &config);

} // namespace fedsa
