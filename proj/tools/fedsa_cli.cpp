// Command-line front end: run, sweep, compare-baselines, classify.

#include "fedsa/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

void add_common(CLI::App *cmd, fedsa::CommandOptions &opts) {
    cmd->add_option("--config", opts.config_path, "TOML experiment configuration")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out, "output directory")->capture_default_str();
    cmd->add_option("--seed", opts.seed, "override the master seed");
    cmd->add_option("--rounds", opts.rounds, "override the number of rounds")
        ->check(CLI::NonNegativeNumber);
    cmd->add_flag("--unsafe-delta", opts.unsafe_delta,
                  "accept step-size exponents outside (0.75, 1]; outputs are marked");
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Federated stochastic-approximation experiments"};
    app.require_subcommand(1);

    fedsa::CommandOptions run_opts, sweep_opts, base_opts, class_opts;
    auto *run = app.add_subcommand("run", "run one experiment");
    add_common(run, run_opts);

    auto *sweep = app.add_subcommand("sweep", "run one experiment per parameter value");
    add_common(sweep, sweep_opts);
    sweep->add_option("--param", sweep_opts.sweep_param,
                      "delta, snr_db, N, sigma_w or sigma_x-set");
    sweep->add_option("--values", sweep_opts.sweep_values,
                      "comma-separated values; sigma_x sets separated by ';'");

    auto *baselines = app.add_subcommand(
        "compare-baselines", "proposed vs FedAvg, FedProx, FedNova under constant and tapering steps");
    add_common(baselines, base_opts);

    auto *classify = app.add_subcommand("classify", "rare-class softmax study over three step-size regimes");
    add_common(classify, class_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? fedsa::kExitOk : fedsa::kExitValidation;
    }

    if (*run)
        return fedsa::cmd_run(run_opts, std::cout, std::cerr);
    if (*sweep)
        return fedsa::cmd_sweep(sweep_opts, std::cout, std::cerr);
    if (*baselines)
        return fedsa::cmd_compare_baselines(base_opts, std::cout, std::cerr);
    return fedsa::cmd_classify(class_opts, std::cout, std::cerr);
}
