#pragma once

#include "fedsa/core.hpp"
#include "fedsa/engine.hpp"
#include "fedsa/ode.hpp"
#include "fedsa/regression.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fedsa {

enum class TaskKind { Regression, Classification };

/// Diagnostics of one aggregation. Fields that do not apply to the task are
/// left empty and serialised as empty CSV cells.
struct MetricsRecord {
    std::int64_t round = 0;
    std::int64_t global_step = 0;
    std::optional<double> T_n;
    std::optional<double> param_error;
    std::optional<double> agg_grad_norm;
    std::vector<double> client_grad_norms;
    std::optional<double> delta_wbar;
    std::optional<double> train_loss;
    std::optional<double> train_acc;
    std::optional<double> test_loss;
    std::optional<double> test_acc;
    std::optional<double> rare_class_acc;
    std::optional<double> tracking_error;
    std::vector<double> w_bar; // empty unless aggregate dumping is on

    friend bool operator==(const MetricsRecord &, const MetricsRecord &) = default;
};

/// Column set of a metrics CSV.
struct CsvLayout {
    TaskKind kind = TaskKind::Regression;
    std::size_t clients = 0;  // grad_norm_c1..cL (regression only)
    std::size_t wbar_dim = 0; // wbar_1..wbar_d, appended when nonzero

    std::vector<std::string> header() const;

    friend bool operator==(const CsvLayout &, const CsvLayout &) = default;
};

/// Shortest text that parses back to the same double.
std::string format_double(double value);

void write_csv(std::span<const MetricsRecord> records, const CsvLayout &layout, std::ostream &out);
void write_csv(std::span<const MetricsRecord> records, const CsvLayout &layout,
               const std::filesystem::path &path);

struct CsvTable {
    CsvLayout layout;
    std::vector<MetricsRecord> records;
};

CsvTable read_csv(std::istream &in);
CsvTable read_csv(const std::filesystem::path &path);

template <typename Scalar>
std::vector<double> to_std(const Vector<Scalar> &v) {
    std::vector<double> out(static_cast<std::size_t>(v.size()));
    for (Index j = 0; j < v.size(); ++j)
        out[static_cast<std::size_t>(j)] = double(v[j]);
    return out;
}

/// Regression diagnostics at a freshly aggregated state. Gradient norms are
/// evaluated at the aggregate, not at local iterates.
template <typename Scalar>
MetricsRecord record_round(const FederatedState<Scalar> &state,
                           const std::vector<RegressionTask<Scalar>> &tasks,
                           const Vector<Scalar> &p,
                           const std::optional<Vector<Scalar>> &w_star,
                           const std::optional<Vector<Scalar>> &previous_w_bar,
                           Scalar event_time, bool keep_w_bar = false) {
    const auto &w = state.w_bar;
    MetricsRecord rec;
    rec.round = state.round;
    rec.global_step = state.step;
    rec.T_n = double(event_time);
    if (w_star)
        rec.param_error = double((w - *w_star).norm());
    rec.agg_grad_norm = double(ode_rhs(p, std::span<const RegressionTask<Scalar>>(tasks), w).norm());
    rec.client_grad_norms.reserve(tasks.size());
    for (const auto &task : tasks)
        rec.client_grad_norms.push_back(double(regression_population_h(task, w).norm()));
    if (previous_w_bar)
        rec.delta_wbar = double((w - *previous_w_bar).norm());
    if (keep_w_bar)
        rec.w_bar = to_std(w);
    return rec;
}

} // namespace fedsa
