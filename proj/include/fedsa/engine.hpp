#pragma once

#include "fedsa/core.hpp"
#include "fedsa/regression.hpp"
#include "fedsa/rng.hpp"
#include "fedsa/schedules.hpp"
#include "fedsa/softmax.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedsa {

// ---------------------------------------------------------------------------
// Gradient sources

template <typename Source, typename Scalar>
concept GradientSource = requires(const Source &s, const Vector<Scalar> &w,
                                  std::span<const Index> batch) {
    { s.sample_count() } -> std::convertible_to<Index>;
    { s.minibatch_grad(w, batch) } -> std::convertible_to<Vector<Scalar>>;
};

/// Sources that can also report the exact mean gradient over their dataset,
/// which is the conditional mean of a uniformly drawn mini-batch gradient.
template <typename Source, typename Scalar>
concept ExactMeanGradient = GradientSource<Source, Scalar> &&
                            requires(const Source &s, const Vector<Scalar> &w) {
                                { s.mean_grad(w) } -> std::convertible_to<Vector<Scalar>>;
                            };

template <typename Scalar = double>
class RegressionSource {
public:
    explicit RegressionSource(RegressionDataset<Scalar> data)
        : data_(std::move(data)), moments_(RegressionMoments<Scalar>::of(data_)) {}

    Index sample_count() const { return data_.size(); }
    const RegressionDataset<Scalar> &data() const { return data_; }

    Vector<Scalar> minibatch_grad(const Vector<Scalar> &w, std::span<const Index> batch) const {
        return regression_minibatch_grad(w, data_, batch);
    }

    Vector<Scalar> mean_grad(const Vector<Scalar> &w) const { return -moments_.h(w); }

private:
    RegressionDataset<Scalar> data_;
    RegressionMoments<Scalar> moments_;
};

/// Linear softmax client; parameters travel through the engine packed.
template <typename Scalar = double>
class SoftmaxSource {
public:
    SoftmaxSource(ClassificationDataset<Scalar> data, Index classes)
        : data_(std::move(data)), classes_(classes) {}

    Index sample_count() const { return data_.size(); }
    Index classes() const { return classes_; }
    const ClassificationDataset<Scalar> &data() const { return data_; }

    Vector<Scalar> minibatch_grad(const Vector<Scalar> &w, std::span<const Index> batch) const {
        const auto params = SoftmaxParams<Scalar>::unpack(w, classes_, data_.dim());
        return softmax_minibatch_grad(params, data_, batch).pack();
    }

private:
    ClassificationDataset<Scalar> data_;
    Index classes_;
};

// ---------------------------------------------------------------------------
// Algorithm variants

enum class Algorithm { Proposed, FedAvg, FedProx, FedNova };

struct AlgorithmVariant {
    Algorithm tag = Algorithm::Proposed;
    double mu = 0.0; // FedProx proximal weight

    static constexpr double kDefaultProxMu = 0.1;

    static AlgorithmVariant proposed() { return {Algorithm::Proposed, 0.0}; }
    static AlgorithmVariant fedavg() { return {Algorithm::FedAvg, 0.0}; }
    static AlgorithmVariant fednova() { return {Algorithm::FedNova, 0.0}; }
    static AlgorithmVariant fedprox(double mu = kDefaultProxMu) {
        if (!(mu > 0.0))
            throw ValidationError("fedprox_mu", "proximal weight must be positive");
        return {Algorithm::FedProx, mu};
    }

    bool is_baseline() const { return tag != Algorithm::Proposed; }

    std::string name() const {
        switch (tag) {
        case Algorithm::Proposed: return "proposed";
        case Algorithm::FedAvg: return "fedavg";
        case Algorithm::FedProx: return "fedprox";
        case Algorithm::FedNova: return "fednova";
        }
        return "unknown";
    }

    friend bool operator==(const AlgorithmVariant &, const AlgorithmVariant &) = default;
};

inline std::optional<Algorithm> parse_algorithm(std::string_view name) {
    if (name == "proposed") return Algorithm::Proposed;
    if (name == "fedavg") return Algorithm::FedAvg;
    if (name == "fedprox") return Algorithm::FedProx;
    if (name == "fednova") return Algorithm::FedNova;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// State

template <typename Scalar = double>
struct ClientState {
    std::size_t id = 0;
    Vector<Scalar> w;
    StepSizeSchedule<Scalar> schedule;
    Rng rng;
    std::int64_t local_steps = 0; // gradient steps since the last aggregation
};

template <typename Scalar = double>
struct FederatedState {
    std::vector<ClientState<Scalar>> clients;
    Vector<Scalar> w_bar;      // most recent aggregate
    std::int64_t step = 0;     // global index of the last completed step
    std::int64_t round = 0;
    std::int64_t period = 2;   // N
    AlgorithmVariant algorithm;
    bool aggregated = false;   // the step-0 average has been taken

    std::size_t size() const { return clients.size(); }
    Index dim() const { return w_bar.size(); }
};

/// Builds the pre-aggregation state. Call aggregate() once to perform the
/// step-0 average of the initial iterates.
template <typename Scalar>
FederatedState<Scalar> make_federated_state(std::vector<Vector<Scalar>> initial,
                                            const std::vector<StepSizeSchedule<Scalar>> &schedules,
                                            std::vector<Rng> batch_streams,
                                            std::int64_t period, AlgorithmVariant algorithm) {
    const std::size_t L = initial.size();
    if (L == 0)
        throw ValidationError("clients", "at least one client required");
    if (schedules.size() != L || batch_streams.size() != L)
        throw DimensionMismatch("need one schedule and one stream per client");
    if (period < 1)
        throw ValidationError("N", "aggregation period must be positive");
    const Index d = initial.front().size();
    FederatedState<Scalar> state;
    state.period = period;
    state.algorithm = algorithm;
    state.clients.reserve(L);
    for (std::size_t i = 0; i < L; ++i) {
        if (initial[i].size() != d)
            throw DimensionMismatch("client initial iterates differ in dimension");
        if (!algorithm.is_baseline() && !schedules[i].is_tapering())
            throw ValidationError("schedules[" + std::to_string(i) + "]",
                                  "the proposed algorithm requires tapering step sizes");
        state.clients.push_back(ClientState<Scalar>{i, std::move(initial[i]), schedules[i],
                                                    std::move(batch_streams[i]), 0});
    }
    state.w_bar = state.clients.front().w;
    return state;
}

// ---------------------------------------------------------------------------
// Noise recording

template <typename Scalar = double>
struct NoiseSample {
    std::int64_t step = 0;
    Scalar step_size = Scalar(0);
    Vector<Scalar> M; // -(S_m - exact mean gradient)
};

template <typename Scalar = double>
struct NoiseLog {
    std::vector<std::vector<NoiseSample<Scalar>>> per_client;

    explicit NoiseLog(std::size_t clients = 0) : per_client(clients) {}
};

// ---------------------------------------------------------------------------
// Steps

struct StepOptions {
    Index batch_size = 1;
    bool full_batch = false;
    AlgorithmVariant algorithm;
};

template <typename Scalar>
void draw_batch(Rng &rng, Index sample_count, const StepOptions &opts,
                std::vector<Index> &batch) {
    if (opts.full_batch) {
        batch.resize(static_cast<std::size_t>(sample_count));
        std::iota(batch.begin(), batch.end(), Index(0));
        return;
    }
    if (opts.batch_size < 1)
        throw EmptyBatch();
    std::uniform_int_distribution<Index> pick(0, sample_count - 1);
    batch.resize(static_cast<std::size_t>(opts.batch_size));
    for (auto &k : batch)
        k = pick(rng);
}

/// One stochastic gradient step at global index n:
/// w <- w - a_n (S_m + mu (w - anchor)), the proximal term only for FedProx.
template <typename Scalar, typename Source>
    requires GradientSource<Source, Scalar>
void local_step(ClientState<Scalar> &client, const Source &source, std::int64_t n,
                const StepOptions &opts, const Vector<Scalar> &anchor,
                NoiseLog<Scalar> *noise = nullptr) {
    std::vector<Index> batch;
    draw_batch<Scalar>(client.rng, source.sample_count(), opts, batch);
    Vector<Scalar> grad = source.minibatch_grad(client.w, batch);
    const Scalar a = client.schedule(n);

    if (noise != nullptr) {
        if constexpr (ExactMeanGradient<Source, Scalar>) {
            noise->per_client.at(client.id).push_back(
                {n, a, Vector<Scalar>(-(grad - source.mean_grad(client.w)))});
        } else {
            throw RequiresAnalyticGradient();
        }
    }

    if (opts.algorithm.tag == Algorithm::FedProx)
        grad += Scalar(opts.algorithm.mu) * (client.w - anchor);

    client.w -= a * grad;
    ++client.local_steps;
    if (!client.w.allFinite())
        throw NonFiniteIterate(client.id, n);
}

/// Delta = (1/L) sum_i (w_i - w_prev).
template <typename Scalar>
Vector<Scalar> server_pseudo_gradient(const Vector<Scalar> &w_prev,
                                      std::span<const Vector<Scalar>> client_ws) {
    if (client_ws.empty())
        throw ValidationError("clients", "at least one client required");
    Vector<Scalar> acc = Vector<Scalar>::Zero(w_prev.size());
    for (const auto &w : client_ws) {
        if (w.size() != w_prev.size())
            throw DimensionMismatch("client vector dimension differs");
        acc += w - w_prev;
    }
    return acc / Scalar(client_ws.size());
}

/// Server step. Averaging variants set w_bar to the client mean; FedNova
/// uses w_prev + tau_eff * mean_i(Delta_i / tau_i) with tau_eff = mean tau_i.
/// Every client is then re-initialised to the new aggregate.
template <typename Scalar>
void aggregate(FederatedState<Scalar> &state) {
    const std::size_t L = state.clients.size();
    const Index d = state.w_bar.size();
    for (const auto &c : state.clients)
        if (c.w.size() != d)
            throw DimensionMismatch("client vector dimension differs from aggregate");

    Vector<Scalar> next;
    if (state.aggregated && state.algorithm.tag == Algorithm::FedNova) {
        Scalar tau_eff(0);
        Vector<Scalar> acc = Vector<Scalar>::Zero(d);
        for (const auto &c : state.clients) {
            tau_eff += Scalar(c.local_steps);
            if (c.local_steps > 0)
                acc += (c.w - state.w_bar) / Scalar(c.local_steps);
        }
        tau_eff /= Scalar(L);
        next = state.w_bar + tau_eff * acc / Scalar(L);
    } else {
        next = Vector<Scalar>::Zero(d);
        for (const auto &c : state.clients)
            next += c.w;
        next /= Scalar(L);
    }

    state.w_bar = next;
    for (auto &c : state.clients) {
        c.w = next;
        c.local_steps = 0;
    }
    state.aggregated = true;
}

/// N local gradient steps per client (global indices step+1 .. step+N),
/// then one aggregation at global step step+N.
template <typename Scalar, typename Source>
    requires GradientSource<Source, Scalar>
void run_round(FederatedState<Scalar> &state, std::span<const Source> sources,
               const StepOptions &opts, NoiseLog<Scalar> *noise = nullptr) {
    if (sources.size() != state.clients.size())
        throw DimensionMismatch("need one gradient source per client");
    if (!state.aggregated)
        aggregate(state);
    const Vector<Scalar> anchor = state.w_bar;
    for (std::size_t i = 0; i < state.clients.size(); ++i)
        for (std::int64_t k = 1; k <= state.period; ++k)
            local_step(state.clients[i], sources[i], state.step + k, opts, anchor, noise);
    state.step += state.period;
    aggregate(state);
    ++state.round;
}

template <typename Scalar, typename Source>
    requires GradientSource<Source, Scalar>
void run_round(FederatedState<Scalar> &state, const std::vector<Source> &sources,
               const StepOptions &opts, NoiseLog<Scalar> *noise = nullptr) {
    run_round(state, std::span<const Source>(sources), opts, noise);
}

// ---------------------------------------------------------------------------
// Martingale diagnostics

template <typename Scalar = double>
struct NoiseStats {
    Index count = 0;
    Vector<Scalar> mean;        // empirical mean of M per coordinate
    Vector<Scalar> std_error;   // sample std / sqrt(count)
    Vector<Scalar> r_last;      // R = sum_p a_p M_{p+1} at the last step
    Scalar tail_variation = 0;  // max over the tail of |R_n - R_last|
    Scalar max_abs_z = 0;       // max_j |mean_j| / std_error_j
};

/// Per-client summary of the recorded noise. The tail is the last
/// `tail_fraction` of each client's recorded steps.
template <typename Scalar>
std::vector<NoiseStats<Scalar>> noise_realization_stats(const NoiseLog<Scalar> &log,
                                                        double tail_fraction = 0.5) {
    std::vector<NoiseStats<Scalar>> out;
    for (const auto &samples : log.per_client) {
        NoiseStats<Scalar> st;
        st.count = static_cast<Index>(samples.size());
        if (samples.empty()) {
            out.push_back(std::move(st));
            continue;
        }
        const Index d = samples.front().M.size();
        st.mean = Vector<Scalar>::Zero(d);
        for (const auto &s : samples)
            st.mean += s.M;
        st.mean /= Scalar(st.count);

        Vector<Scalar> var = Vector<Scalar>::Zero(d);
        for (const auto &s : samples)
            var += (s.M - st.mean).array().square().matrix();
        st.std_error = Vector<Scalar>::Zero(d);
        if (st.count > 1)
            st.std_error = (var / Scalar(st.count - 1) / Scalar(st.count)).array().sqrt().matrix();

        std::vector<Vector<Scalar>> partial;
        partial.reserve(samples.size() + 1);
        partial.push_back(Vector<Scalar>::Zero(d));
        for (const auto &s : samples)
            partial.push_back(partial.back() + s.step_size * s.M);
        st.r_last = partial.back();

        const auto first_tail = static_cast<std::size_t>(
            double(samples.size()) * (1.0 - tail_fraction));
        for (std::size_t j = first_tail; j < partial.size(); ++j)
            st.tail_variation = std::max(st.tail_variation, (partial[j] - st.r_last).norm());

        for (Index j = 0; j < d; ++j) {
            const Scalar se = st.std_error[j];
            const Scalar z = se > Scalar(0) ? std::abs(st.mean[j]) / se
                                            : (st.mean[j] == Scalar(0) ? Scalar(0)
                                                                       : std::numeric_limits<Scalar>::infinity());
            st.max_abs_z = std::max(st.max_abs_z, z);
        }
        out.push_back(std::move(st));
    }
    return out;
}

} // namespace fedsa
