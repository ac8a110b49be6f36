#include "fedsa/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace fedsa {

namespace fs = std::filesystem;

namespace {

std::string short_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string value_label(const std::vector<double> &value, char sep) {
    std::string s;
    for (std::size_t i = 0; i < value.size(); ++i)
        s += (i ? std::string(1, sep) : std::string{}) + short_number(value[i]);
    return s;
}

std::ofstream open_out(const fs::path &path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoFailure("cannot open " + path.string() + " for writing");
    return out;
}

void prepare_dir(const fs::path &dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw IoFailure("cannot create output directory " + dir.string());
}

std::string failure_message(const RunResult &run) {
    try {
        std::rethrow_exception(run.failure);
    } catch (const std::exception &e) {
        return e.what();
    }
    return "unknown failure";
}

void summarize(const RunResult &run, std::ostream &out) {
    if (run.records.empty())
        return;
    const auto &r = run.records.back();
    out << "round " << r.round << ":";
    auto field = [&](const char *name, const std::optional<double> &v) {
        if (v)
            out << " " << name << "=" << format_double(*v);
    };
    if (run.kind == TaskKind::Regression) {
        field("param_error", r.param_error);
        field("agg_grad_norm", r.agg_grad_norm);
    } else {
        field("test_acc", r.test_acc);
        field("rare_class_acc", r.rare_class_acc);
        field("test_loss", r.test_loss);
    }
    field("delta_wbar", r.delta_wbar);
    out << "\n";
}

template <typename F>
int guarded(std::ostream &err, F &&body) {
    try {
        return body();
    } catch (const ValidationError &e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

/// Runs and writes one configuration into `dir`; returns the run.
RunResult run_into(const ExperimentConfig &config, const fs::path &dir,
                   const std::string &metrics_name = "metrics.csv") {
    prepare_dir(dir);
    auto run = run_experiment(config);
    write_csv(run.records, csv_layout(config), dir / metrics_name);
    return run;
}

double final_ratio(const std::vector<MetricsRecord> &records) {
    if (records.size() < 2 || !records[1].agg_grad_norm || !records.back().agg_grad_norm)
        return std::numeric_limits<double>::quiet_NaN();
    return *records.back().agg_grad_norm / *records[1].agg_grad_norm;
}

} // namespace

ExperimentConfig resolve_config(const CommandOptions &options) {
    ExperimentConfig cfg;
    if (options.config_path)
        cfg = load_config(*options.config_path, options.unsafe_delta);
    cfg.unsafe_delta = cfg.unsafe_delta || options.unsafe_delta;
    if (options.seed)
        cfg.seed = *options.seed;
    if (options.rounds)
        cfg.rounds = *options.rounds;
    validate(cfg);
    return cfg;
}

std::vector<std::vector<double>> parse_sweep_values(const std::string &parameter,
                                                    const std::string &text) {
    const bool sets = parameter == "sigma_x-set";
    const char outer = sets ? ';' : ',';
    std::vector<std::vector<double>> out;
    std::istringstream groups(text);
    std::string group;
    while (std::getline(groups, group, outer)) {
        std::vector<double> value;
        std::istringstream items(group);
        std::string item;
        while (std::getline(items, item, ',')) {
            item.erase(0, item.find_first_not_of(" \t"));
            item.erase(item.find_last_not_of(" \t") + 1);
            if (item.empty())
                continue;
            double v = 0.0;
            const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
            if (res.ec != std::errc{} || res.ptr != item.data() + item.size())
                throw ValidationError("sweep.values", "bad number '" + item + "'");
            value.push_back(v);
        }
        if (value.empty())
            continue;
        if (sets)
            out.push_back(std::move(value));
        else
            for (double v : value)
                out.push_back({v});
    }
    if (out.empty())
        throw ValidationError("sweep.values", "need at least one value");
    return out;
}

ExperimentConfig apply_sweep_value(ExperimentConfig config, const std::string &parameter,
                                   const std::vector<double> &value) {
    auto *reg = std::get_if<RegressionSpec>(&config.task);
    if (parameter != "N" && reg == nullptr)
        throw ValidationError("sweep.parameter", parameter + " sweeps need the regression task");
    if (value.empty() || (parameter != "sigma_x-set" && value.size() != 1))
        throw ValidationError("sweep.values", "expected a single number per sweep point");
    const double v = value.front();

    if (parameter == "delta") {
        for (auto &s : config.schedules) {
            if (s.constant)
                throw ValidationError("sweep.parameter", "delta sweeps need tapering schedules");
            s.delta = v;
        }
    } else if (parameter == "snr_db") {
        reg->snr_db = v;
    } else if (parameter == "N") {
        if (v != std::floor(v))
            throw ValidationError("sweep.values", "N must be an integer");
        config.period = static_cast<std::int64_t>(v);
    } else if (parameter == "sigma_w") {
        if (!reg->w_true.empty())
            throw ValidationError("sweep.parameter", "sigma_w has no effect with explicit w_true");
        reg->sigma_w = v;
    } else if (parameter == "sigma_x-set") {
        reg->sigma_x_choices = value;
    } else {
        throw ValidationError("sweep.parameter",
                              "expected one of delta, snr_db, N, sigma_w, sigma_x-set");
    }
    config.sweep.reset();
    validate(config);
    return config;
}

double tail_median(std::span<const double> values, double fraction) {
    if (values.empty())
        return std::numeric_limits<double>::quiet_NaN();
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(double(values.size()) * fraction));
    std::vector<double> tail(values.end() - static_cast<std::ptrdiff_t>(n), values.end());
    const auto mid = tail.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(tail.begin(), mid, tail.end());
    if (n % 2 == 1)
        return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(tail.begin(), mid);
    return 0.5 * (lower + upper);
}

double tail_mean(std::span<const double> values, double fraction) {
    if (values.empty())
        return std::numeric_limits<double>::quiet_NaN();
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(double(values.size()) * fraction));
    return std::accumulate(values.end() - static_cast<std::ptrdiff_t>(n), values.end(), 0.0) /
           double(n);
}

std::vector<double> column(const std::vector<MetricsRecord> &records,
                           std::optional<double> MetricsRecord::*field) {
    std::vector<double> out;
    for (const auto &r : records)
        if (r.*field)
            out.push_back(*(r.*field));
    return out;
}

void write_run_outputs(const ExperimentConfig &config, const RunResult &run, const fs::path &dir) {
    prepare_dir(dir);
    write_csv(run.records, csv_layout(config), dir / "metrics.csv");
    {
        auto out = open_out(dir / "config.toml");
        out << dump_config(config);
    }
    if (!run.tracking.empty()) {
        auto out = open_out(dir / "tracking.csv");
        out << "n_start,m,T,tracking_error\n";
        for (const auto &row : run.tracking)
            out << row.n_start << ',' << row.m << ',' << format_double(row.t) << ','
                << format_double(row.error) << '\n';
    }
    if (!run.noise_stats.empty()) {
        auto out = open_out(dir / "noise_summary.csv");
        out << "client,coordinate,count,mean,std_error,z,r_last,tail_variation\n";
        for (std::size_t i = 0; i < run.noise_stats.size(); ++i) {
            const auto &st = run.noise_stats[i];
            for (Index j = 0; j < st.mean.size(); ++j) {
                const double se = st.std_error[j];
                out << i + 1 << ',' << j + 1 << ',' << st.count << ',' << format_double(st.mean[j])
                    << ',' << format_double(se) << ','
                    << format_double(se > 0 ? st.mean[j] / se : 0.0) << ','
                    << format_double(st.r_last[j]) << ',' << format_double(st.tail_variation)
                    << '\n';
            }
        }
    }
    if (config.diagnostics.dump_dataset && config.kind() == TaskKind::Regression) {
        const auto prob = build_regression_problem(config);
        for (std::size_t i = 0; i < prob.sources.size(); ++i) {
            const auto &data = prob.sources[i].data();
            auto out = open_out(dir / ("dataset_client" + std::to_string(i + 1) + ".csv"));
            for (Index j = 0; j < data.dim(); ++j)
                out << "x_" << j + 1 << ',';
            out << "y\n";
            for (Index k = 0; k < data.size(); ++k) {
                for (Index j = 0; j < data.dim(); ++j)
                    out << format_double(data.features(j, k)) << ',';
                out << format_double(data.targets[k]) << '\n';
            }
        }
    }
}

int cmd_run(const CommandOptions &options, std::ostream &out, std::ostream &err) {
    return guarded(err, [&] {
        const auto cfg = resolve_config(options);
        if (!cfg.theory_supported())
            err << "warning: step-size exponent outside (0.75, 1]; results are theory-unsupported\n";
        prepare_dir(options.out);
        const auto run = run_experiment(cfg);
        write_run_outputs(cfg, run, options.out);
        summarize(run, out);
        if (!run.ok()) {
            err << "error: " << failure_message(run) << " (partial metrics written)\n";
            return int(kExitRuntime);
        }
        return int(kExitOk);
    });
}

int cmd_sweep(const CommandOptions &options, std::ostream &out, std::ostream &err) {
    return guarded(err, [&] {
        const auto cfg = resolve_config(options);
        SweepSpec spec;
        if (cfg.sweep)
            spec = *cfg.sweep;
        if (options.sweep_param)
            spec.parameter = *options.sweep_param;
        if (options.sweep_values)
            spec.values = parse_sweep_values(spec.parameter, *options.sweep_values);
        if (spec.parameter.empty())
            throw ValidationError("sweep.parameter", "no sweep parameter given");
        if (spec.values.empty())
            throw ValidationError("sweep.values", "no sweep values given");

        std::vector<ExperimentConfig> points;
        for (const auto &v : spec.values)
            points.push_back(apply_sweep_value(cfg, spec.parameter, v));

        prepare_dir(options.out);
        auto index = open_out(options.out / "sweep_index.csv");
        index << "param,value,csv,final_param_error,status\n";
        bool all_ok = true;
        for (std::size_t k = 0; k < points.size(); ++k) {
            const auto &point = points[k];
            const std::string sub = spec.parameter + "_" + value_label(spec.values[k], '-');
            const auto run = run_experiment(point);
            write_run_outputs(point, run, options.out / sub);
            const auto err_col = column(run.records, &MetricsRecord::param_error);
            std::string status = run.ok() ? "ok" : "failed: " + failure_message(run);
            if (!point.theory_supported())
                status += " (theory-unsupported)";
            std::replace(status.begin(), status.end(), ',', ';');
            index << spec.parameter << ',' << value_label(spec.values[k], ';') << ',' << sub
                  << "/metrics.csv," << (err_col.empty() ? "" : format_double(err_col.back()))
                  << ',' << status << '\n';
            out << spec.parameter << "=" << value_label(spec.values[k], ';') << " ";
            summarize(run, out);
            all_ok = all_ok && run.ok();
        }
        index.flush();
        if (!index)
            throw IoFailure("write to sweep_index.csv failed");
        return int(all_ok ? kExitOk : kExitRuntime);
    });
}

int cmd_compare_baselines(const CommandOptions &options, std::ostream &out, std::ostream &err) {
    return guarded(err, [&] {
        const auto base = resolve_config(options);
        if (base.kind() != TaskKind::Regression)
            throw ValidationError("task.kind", "baseline comparison needs the regression task");
        prepare_dir(options.out);
        auto summary = open_out(options.out / "baselines_summary.csv");
        summary << "group,algorithm,schedule,csv,tail_median_delta_wbar,tail_median_param_error,"
                   "final_param_error,agg_grad_norm_ratio,status\n";

        const std::vector<AlgorithmVariant> algorithms{
            AlgorithmVariant::proposed(), AlgorithmVariant::fedavg(),
            AlgorithmVariant::fedprox(base.algorithm.tag == Algorithm::FedProx
                                          ? base.algorithm.mu
                                          : AlgorithmVariant::kDefaultProxMu),
            AlgorithmVariant::fednova()};
        for (const std::string group : {"constant", "tapering"}) {
            for (const auto &alg : algorithms) {
                auto cfg = base;
                cfg.algorithm = alg;
                const bool constant = group == "constant" && alg.is_baseline();
                cfg.schedules = {constant ? ScheduleSpec{true, 0.1, 0.0}
                                          : ScheduleSpec{false, 0.1, 0.76}};
                validate(cfg);
                const std::string name = group + "_" + alg.name() + ".csv";
                const auto run = run_into(cfg, options.out, name);
                const auto dw = column(run.records, &MetricsRecord::delta_wbar);
                const auto pe = column(run.records, &MetricsRecord::param_error);
                std::string status = run.ok() ? "ok" : "failed: " + failure_message(run);
                std::replace(status.begin(), status.end(), ',', ';');
                summary << group << ',' << alg.name() << ','
                        << (constant ? "0.1" : "0.1/n^0.76") << ',' << name << ','
                        << format_double(tail_median(dw)) << ',' << format_double(tail_median(pe))
                        << ',' << (pe.empty() ? "" : format_double(pe.back())) << ','
                        << format_double(final_ratio(run.records)) << ',' << status << '\n';
                out << group << " " << alg.name() << ": tail median delta_wbar "
                    << format_double(tail_median(dw)) << (run.ok() ? "" : " [" + status + "]")
                    << "\n";
            }
        }
        return int(kExitOk);
    });
}

std::vector<ScheduleSpec> classify_regime(const std::string &regime, std::int64_t clients) {
    const auto L = static_cast<std::size_t>(clients);
    std::vector<ScheduleSpec> s(L, ScheduleSpec{false, 0.1, 0.76});
    if (regime == "uniform")
        return s;
    if (regime == "finite") {
        for (std::size_t i = 1; i < L; ++i)
            s[i].c = 0.01;
        return s;
    }
    if (regime == "vanishing") {
        s[0].delta = 1.0;
        return s;
    }
    throw ValidationError("regime", "expected uniform, finite or vanishing");
}

int cmd_classify(const CommandOptions &options, std::ostream &out, std::ostream &err) {
    return guarded(err, [&] {
        ExperimentConfig base;
        if (options.config_path) {
            base = resolve_config(options);
            if (base.kind() != TaskKind::Classification)
                throw ValidationError("task.kind", "classify needs kind = \"classification\"");
        } else {
            base.task = ClassificationSpec{};
            base.init_std = kClassificationInitStd;
            if (options.seed)
                base.seed = *options.seed;
            if (options.rounds)
                base.rounds = *options.rounds;
            validate(base);
        }
        const auto &spec = std::get<ClassificationSpec>(base.task);
        prepare_dir(options.out);
        auto summary = open_out(options.out / "classify_summary.csv");
        summary << "regime,tail_rare_class_acc,tail_test_acc,final_test_acc,majority_baseline,"
                   "status\n";
        const double majority =
            double((spec.test_samples + spec.classes - 1) / spec.classes) / double(spec.test_samples);
        bool all_ok = true;
        for (const std::string regime : {"uniform", "finite", "vanishing"}) {
            auto cfg = base;
            cfg.schedules = classify_regime(regime, cfg.clients);
            validate(cfg);
            const auto run = run_into(cfg, options.out, "classify_" + regime + ".csv");
            const auto rare = column(run.records, &MetricsRecord::rare_class_acc);
            const auto test = column(run.records, &MetricsRecord::test_acc);
            std::string status = run.ok() ? "ok" : "failed: " + failure_message(run);
            std::replace(status.begin(), status.end(), ',', ';');
            summary << regime << ',' << format_double(tail_mean(rare)) << ','
                    << format_double(tail_mean(test)) << ','
                    << (test.empty() ? "" : format_double(test.back())) << ','
                    << format_double(majority) << ',' << status << '\n';
            out << regime << ": tail rare-class acc " << format_double(tail_mean(rare))
                << ", tail test acc " << format_double(tail_mean(test)) << "\n";
            all_ok = all_ok && run.ok();
        }
        return int(all_ok ? kExitOk : kExitRuntime);
    });
}

} // namespace fedsa
