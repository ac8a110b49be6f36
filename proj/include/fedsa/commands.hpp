#pragma once

#include "fedsa/config.hpp"
#include "fedsa/experiment.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fedsa {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitRuntime = 2 };

struct CommandOptions {
    std::optional<std::filesystem::path> config_path;
    std::filesystem::path out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> rounds;
    bool unsafe_delta = false;
    std::optional<std::string> sweep_param;  // sweep only
    std::optional<std::string> sweep_values; // comma separated; ';' separates sigma_x sets
};

/// Loads the config file (or the defaults when none is given) and applies
/// command-line overrides.
ExperimentConfig resolve_config(const CommandOptions &options);

std::vector<std::vector<double>> parse_sweep_values(const std::string &parameter,
                                                    const std::string &text);

/// Copy of `config` with one sweep value substituted, revalidated.
ExperimentConfig apply_sweep_value(ExperimentConfig config, const std::string &parameter,
                                   const std::vector<double> &value);

/// Median of the last `fraction` of the values (at least one value).
double tail_median(std::span<const double> values, double fraction = 0.1);
double tail_mean(std::span<const double> values, double fraction = 0.1);

/// Present values of one optional column, in round order.
std::vector<double> column(const std::vector<MetricsRecord> &records,
                           std::optional<double> MetricsRecord::*field);

/// Writes metrics.csv, config.toml and any enabled diagnostic files to `dir`.
void write_run_outputs(const ExperimentConfig &config, const RunResult &run,
                       const std::filesystem::path &dir);

int cmd_run(const CommandOptions &options, std::ostream &out, std::ostream &err);
int cmd_sweep(const CommandOptions &options, std::ostream &out, std::ostream &err);
int cmd_compare_baselines(const CommandOptions &options, std::ostream &out, std::ostream &err);
int cmd_classify(const CommandOptions &options, std::ostream &out, std::ostream &err);

/// The step-size regimes compared by cmd_classify: client 0 holds the rare
/// class; "uniform" gives every client 0.1/n^0.76, "finite" scales the other
/// clients to 0.01/n^0.76, "vanishing" gives client 0 the faster 0.1/n.
std::vector<ScheduleSpec> classify_regime(const std::string &regime, std::int64_t clients);

} // namespace fedsa
