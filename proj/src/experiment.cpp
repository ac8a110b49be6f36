#include "fedsa/experiment.hpp"

#include <algorithm>
#include <random>

namespace fedsa {

namespace {

Vector<double> to_vector(const std::vector<double> &v) {
    return Eigen::Map<const Vector<double>>(v.data(), static_cast<Index>(v.size()));
}

std::vector<Rng> batch_streams(std::uint64_t seed, std::size_t clients) {
    std::vector<Rng> out;
    out.reserve(clients);
    for (std::size_t i = 0; i < clients; ++i)
        out.push_back(make_stream(seed, StreamDomain::Batches, i));
    return out;
}

} // namespace

LimitingWeights<double> schedule_weights(const std::vector<StepSizeSchedule<double>> &schedules) {
    if (schedules.empty())
        throw ValidationError("schedules", "at least one schedule required");
    const bool constant = !schedules.front().is_tapering();
    for (const auto &s : schedules)
        if (s.is_tapering() == constant)
            throw ValidationError("schedules", "cannot mix constant and tapering step sizes");
    if (!constant)
        return validate_and_rank(schedules);

    LimitingWeights<double> out;
    for (std::size_t i = 1; i < schedules.size(); ++i)
        if (schedules[i].c() > schedules[out.ref_index].c())
            out.ref_index = i;
    out.p.resize(static_cast<Index>(schedules.size()));
    for (std::size_t i = 0; i < schedules.size(); ++i)
        out.p[static_cast<Index>(i)] = schedules[i].c() / schedules[out.ref_index].c();
    return out;
}

RegressionProblem build_regression_problem(const ExperimentConfig &config) {
    const auto &spec = std::get<RegressionSpec>(config.task);
    const auto L = static_cast<std::size_t>(config.clients);
    const Index d = spec.dim;

    RegressionProblem prob;
    prob.schedules = config.client_schedules();
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < L; ++i) {
        auto params = make_stream(config.seed, StreamDomain::TaskParameters, i);
        RegressionTask<double> task;
        if (spec.w_true.empty()) {
            task.w_true.resize(d);
            for (Index j = 0; j < d; ++j)
                task.w_true[j] = spec.sigma_w * normal(params);
        } else {
            task.w_true = to_vector(spec.w_true.size() == 1 ? spec.w_true.front() : spec.w_true[i]);
        }
        if (!spec.sigma_x_choices.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, spec.sigma_x_choices.size() - 1);
            task.sigma_x = spec.sigma_x_choices[pick(params)];
        } else {
            task.sigma_x = spec.sigma_x.size() == 1 ? spec.sigma_x.front() : spec.sigma_x[i];
        }
        task.sigma_eps = noise_sigma_from_snr(task.sigma_x, task.w_true, spec.snr_db);
        task.n_samples = spec.n_samples;

        auto data_rng = make_stream(config.seed, StreamDomain::Data, i);
        prob.sources.emplace_back(generate_regression_data(task, data_rng));

        auto init_rng = make_stream(config.seed, StreamDomain::Init, i);
        Vector<double> w0(d);
        for (Index j = 0; j < d; ++j)
            w0[j] = config.init_std * normal(init_rng);
        prob.initial.push_back(std::move(w0));
        prob.tasks.push_back(std::move(task));
    }
    return prob;
}

CsvLayout csv_layout(const ExperimentConfig &config) {
    CsvLayout layout;
    layout.kind = config.kind();
    if (layout.kind == TaskKind::Regression) {
        layout.clients = static_cast<std::size_t>(config.clients);
        if (config.diagnostics.dump_wbar)
            layout.wbar_dim = static_cast<std::size_t>(std::get<RegressionSpec>(config.task).dim);
    } else if (config.diagnostics.dump_wbar) {
        const auto &c = std::get<ClassificationSpec>(config.task);
        layout.wbar_dim = static_cast<std::size_t>(c.classes * (c.dim + 1));
    }
    return layout;
}

RunResult run_regression(const ExperimentConfig &config) {
    validate(config);
    auto prob = build_regression_problem(config);
    const auto &diag = config.diagnostics;

    RunResult run;
    run.kind = TaskKind::Regression;
    run.weights = schedule_weights(prob.schedules);
    run.tasks = prob.tasks;
    run.w_star = closed_form_optimum(prob.tasks, run.weights.p);
    run.times = event_times(prob.schedules[run.weights.ref_index], config.period, config.rounds);

    const std::size_t L = prob.tasks.size();
    auto state = make_federated_state(std::move(prob.initial), prob.schedules,
                                      batch_streams(config.seed, L), config.period,
                                      config.algorithm);
    const StepOptions opts{config.batch_size, diag.full_batch, config.algorithm};
    std::optional<NoiseLog<double>> noise;
    if (diag.record_noise)
        noise.emplace(L);

    aggregate(state);
    auto record = [&](const std::optional<Vector<double>> &prev) {
        const double t = run.times[static_cast<std::size_t>(state.round)];
        run.records.push_back(
            record_round(state, run.tasks, run.weights.p, run.w_star, prev, t, diag.dump_wbar));
        run.path.knots.push_back(t);
        run.path.values.push_back(state.w_bar);
    };
    record(std::nullopt);

    try {
        for (std::int64_t r = 1; r <= config.rounds; ++r) {
            const Vector<double> prev = state.w_bar;
            run_round(state, prob.sources, opts, noise ? &*noise : nullptr);
            record(prev);
        }
    } catch (const Error &) {
        run.failure = std::current_exception();
    }
    run.w_bar = state.w_bar;

    if (noise)
        run.noise_stats = noise_realization_stats(*noise);
    if (diag.tracking_error && run.ok()) {
        run.tracking = tracking_rows(run, diag.tracking_horizon, diag.tracking_stride,
                                     diag.ode_h_max);
        for (const auto &row : run.tracking) {
            auto &slot = run.records[static_cast<std::size_t>(row.n_start)].tracking_error;
            slot = std::max(slot.value_or(0.0), row.error);
        }
    }
    return run;
}

std::vector<TrackingRow> tracking_rows(const RunResult &run, double horizon, std::int64_t stride,
                                       double h_max) {
    std::vector<TrackingRow> rows;
    const RegressionOde<double> rhs(run.weights.p, run.tasks);
    const std::span<const double> knots(run.path.knots);
    for (std::size_t n = 0; n + 1 < knots.size(); n += static_cast<std::size_t>(stride)) {
        const auto m = horizon_rounds(knots, n, horizon);
        if (m == 0)
            continue;
        const auto err = tracking_error(run.path, rhs, n, m, h_max);
        for (std::size_t k = 1; k <= m; ++k)
            rows.push_back({static_cast<std::int64_t>(n), static_cast<std::int64_t>(k),
                            knots[n + k], err[k]});
    }
    return rows;
}

double max_tracking_error(const RunResult &run, std::int64_t n_start, double horizon,
                          double h_max) {
    const RegressionOde<double> rhs(run.weights.p, run.tasks);
    const auto n = static_cast<std::size_t>(n_start);
    const auto m = horizon_rounds(std::span<const double>(run.path.knots), n, horizon);
    const auto err = tracking_error(run.path, rhs, n, m, h_max);
    return *std::max_element(err.begin(), err.end());
}

RunResult run_experiment(const ExperimentConfig &config) {
    return config.kind() == TaskKind::Regression ? run_regression(config)
                                                 : run_classification(config);
}

} // namespace fedsa
