#include "fedsa/experiment.hpp"

#include <random>

namespace fedsa {

std::vector<std::vector<double>> client_class_proportions(const ClassificationSpec &spec,
                                                          std::int64_t clients) {
    const auto K = static_cast<std::size_t>(spec.classes);
    std::vector<std::vector<double>> out;
    for (std::int64_t i = 0; i < clients; ++i) {
        std::vector<double> q(K, 0.0);
        if (spec.partition == Partition::RareClass) {
            const auto r = static_cast<std::size_t>(spec.rare_class);
            if (i == 0) {
                q[r] = 1.0;
            } else {
                for (std::size_t k = 0; k < K; ++k)
                    q[k] = k == r ? 0.0 : 1.0 / double(K - 1);
            }
        } else {
            const auto dom = static_cast<std::size_t>(i) % K;
            for (std::size_t k = 0; k < K; ++k)
                q[k] = k == dom ? spec.dominant_fraction
                                : (1.0 - spec.dominant_fraction) / double(K - 1);
        }
        out.push_back(std::move(q));
    }
    return out;
}

ClassificationProblem build_classification_problem(const ExperimentConfig &config) {
    const auto &spec = std::get<ClassificationSpec>(config.task);
    ClassificationProblem prob;
    prob.task.classes = spec.classes;
    prob.task.dim = spec.dim;
    prob.task.class_means = circle_class_means<double>(spec.classes, spec.dim, spec.class_radius);
    prob.task.sigma_x = spec.sigma_x;
    prob.task.n_samples = spec.n_samples;
    prob.schedules = config.client_schedules();

    const auto proportions = client_class_proportions(spec, config.clients);
    const Index packed = SoftmaxParams<double>::packed_size(spec.classes, spec.dim);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < proportions.size(); ++i) {
        auto data_rng = make_stream(config.seed, StreamDomain::Data, i);
        prob.sources.emplace_back(generate_classification_data(prob.task, proportions[i], data_rng),
                                  spec.classes);
        auto init_rng = make_stream(config.seed, StreamDomain::Init, i);
        Vector<double> w0(packed);
        for (Index j = 0; j < packed; ++j)
            w0[j] = config.init_std * normal(init_rng);
        prob.initial.push_back(std::move(w0));
    }

    // balanced held-out set, one block per class
    const auto K = static_cast<std::size_t>(spec.classes);
    auto &test = prob.test;
    test.features.resize(spec.dim, spec.test_samples);
    Index filled = 0;
    for (std::size_t k = 0; k < K; ++k) {
        auto block_task = prob.task;
        block_task.n_samples = spec.test_samples / spec.classes +
                               (static_cast<std::int64_t>(k) < spec.test_samples % spec.classes);
        if (block_task.n_samples == 0)
            continue;
        std::vector<double> one_hot(K, 0.0);
        one_hot[k] = 1.0;
        auto rng = make_stream(config.seed, StreamDomain::TestData, k);
        const auto block = generate_classification_data(block_task, one_hot, rng);
        test.features.middleCols(filled, block.size()) = block.features;
        test.labels.insert(test.labels.end(), block.labels.begin(), block.labels.end());
        filled += block.size();
    }
    return prob;
}

RunResult run_classification(const ExperimentConfig &config) {
    validate(config);
    const auto &spec = std::get<ClassificationSpec>(config.task);
    auto prob = build_classification_problem(config);
    const auto &diag = config.diagnostics;

    RunResult run;
    run.kind = TaskKind::Classification;
    run.weights = schedule_weights(prob.schedules);
    run.times = event_times(prob.schedules[run.weights.ref_index], config.period, config.rounds);

    const std::size_t L = prob.sources.size();
    std::vector<Rng> streams;
    for (std::size_t i = 0; i < L; ++i)
        streams.push_back(make_stream(config.seed, StreamDomain::Batches, i));
    auto state = make_federated_state(std::move(prob.initial), prob.schedules, std::move(streams),
                                      config.period, config.algorithm);
    const StepOptions opts{config.batch_size, diag.full_batch, config.algorithm};
    const int rare = static_cast<int>(spec.rare_class);

    auto record = [&](const std::optional<Vector<double>> &prev) {
        const auto params = SoftmaxParams<double>::unpack(state.w_bar, spec.classes, spec.dim);
        MetricsRecord rec;
        rec.round = state.round;
        rec.global_step = state.step;
        double loss = 0.0, acc = 0.0;
        for (const auto &src : prob.sources) {
            const auto e = evaluate(params, src.data());
            loss += e.loss;
            acc += e.accuracy;
        }
        rec.train_loss = loss / double(L);
        rec.train_acc = acc / double(L);
        const auto test = evaluate(params, prob.test);
        rec.test_loss = test.loss;
        rec.test_acc = test.accuracy;
        const auto rare_eval = evaluate(params, prob.test, [rare](int y) { return y == rare; });
        if (rare_eval.count > 0)
            rec.rare_class_acc = rare_eval.accuracy;
        if (prev)
            rec.delta_wbar = (state.w_bar - *prev).norm();
        if (diag.dump_wbar)
            rec.w_bar = to_std(state.w_bar);
        run.records.push_back(std::move(rec));
        const double t = run.times[static_cast<std::size_t>(state.round)];
        run.path.knots.push_back(t);
        run.path.values.push_back(state.w_bar);
    };

    aggregate(state);
    record(std::nullopt);
    try {
        for (std::int64_t r = 1; r <= config.rounds; ++r) {
            const Vector<double> prev = state.w_bar;
            run_round(state, prob.sources, opts);
            record(prev);
        }
    } catch (const Error &) {
        run.failure = std::current_exception();
    }
    run.w_bar = state.w_bar;
    return run;
}

} // namespace fedsa
