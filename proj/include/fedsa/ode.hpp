#pragma once

#include "fedsa/core.hpp"
#include "fedsa/regression.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace fedsa {

/// (1/L) sum_i p_i h_i(w) with the analytic population h of each task.
template <typename Scalar, typename DerivedP, typename DerivedW>
Vector<Scalar> ode_rhs(const Eigen::MatrixBase<DerivedP> &p,
                       std::span<const RegressionTask<Scalar>> tasks,
                       const Eigen::MatrixBase<DerivedW> &w) {
    if (static_cast<Index>(tasks.size()) != p.size())
        throw DimensionMismatch("weight count differs from task count");
    Vector<Scalar> acc = Vector<Scalar>::Zero(w.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const Scalar pi = p[static_cast<Index>(i)];
        if (pi != Scalar(0))
            acc += pi * regression_population_h(tasks[i], w);
    }
    return acc / Scalar(tasks.size());
}

/// The limiting vector field of a regression federation.
template <typename Scalar = double>
class RegressionOde {
public:
    RegressionOde(Vector<Scalar> p, std::vector<RegressionTask<Scalar>> tasks)
        : p_(std::move(p)), tasks_(std::move(tasks)) {
        if (static_cast<Index>(tasks_.size()) != p_.size())
            throw DimensionMismatch("weight count differs from task count");
    }

    Vector<Scalar> operator()(const Vector<Scalar> &w) const {
        return ode_rhs(p_, std::span<const RegressionTask<Scalar>>(tasks_), w);
    }

    const Vector<Scalar> &weights() const { return p_; }
    const std::vector<RegressionTask<Scalar>> &tasks() const { return tasks_; }

private:
    Vector<Scalar> p_;
    std::vector<RegressionTask<Scalar>> tasks_;
};

template <typename Scalar = double>
struct OdeTrajectory {
    Scalar start_time = Scalar(0);
    std::vector<Scalar> times;
    std::vector<Vector<Scalar>> values;
};

template <typename Scalar, typename Rhs>
Vector<Scalar> rk4_step(const Rhs &rhs, const Vector<Scalar> &w, Scalar h) {
    const Vector<Scalar> k1 = rhs(w);
    const Vector<Scalar> k2 = rhs(Vector<Scalar>(w + (h / 2) * k1));
    const Vector<Scalar> k3 = rhs(Vector<Scalar>(w + (h / 2) * k2));
    const Vector<Scalar> k4 = rhs(Vector<Scalar>(w + h * k3));
    return w + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
}

/// Classical RK4 for the autonomous system w' = rhs(w), sampled at every
/// event time. Each gap is split into ceil(gap / h_max) equal substeps.
template <typename Scalar, typename Rhs>
OdeTrajectory<Scalar> integrate(const Rhs &rhs, const Vector<Scalar> &w0, Scalar s,
                                std::span<const Scalar> event_times,
                                Scalar h_max = Scalar(1e-2)) {
    if (event_times.empty() || event_times.front() != s)
        throw ValidationError("event_times", "must start at the initial time");
    if (!(h_max > Scalar(0)))
        throw ValidationError("h_max", "must be positive");

    OdeTrajectory<Scalar> traj;
    traj.start_time = s;
    traj.times.reserve(event_times.size());
    traj.values.reserve(event_times.size());
    traj.times.push_back(s);
    traj.values.push_back(w0);

    Vector<Scalar> w = w0;
    for (std::size_t k = 1; k < event_times.size(); ++k) {
        const Scalar t0 = event_times[k - 1];
        const Scalar gap = event_times[k] - t0;
        if (!(gap > Scalar(0)))
            throw ValidationError("event_times", "must be strictly increasing");
        const Scalar scale = std::max(Scalar(1), std::abs(t0));
        if (gap < std::numeric_limits<Scalar>::epsilon() * scale)
            throw StepTooLarge("event gap below machine resolution");
        const auto substeps = static_cast<std::int64_t>(std::ceil(gap / h_max));
        const Scalar h = gap / Scalar(substeps);
        for (std::int64_t j = 0; j < substeps; ++j)
            w = rk4_step(rhs, w, h);
        traj.times.push_back(event_times[k]);
        traj.values.push_back(w);
    }
    return traj;
}

template <typename Scalar, typename Rhs>
OdeTrajectory<Scalar> integrate(const Rhs &rhs, const Vector<Scalar> &w0, Scalar s,
                                const std::vector<Scalar> &event_times,
                                Scalar h_max = Scalar(1e-2)) {
    return integrate(rhs, w0, s, std::span<const Scalar>(event_times), h_max);
}

/// Piecewise-linear path through the aggregates at their event times.
template <typename Scalar = double>
struct InterpolatedPath {
    std::vector<Scalar> knots;
    std::vector<Vector<Scalar>> values;

    std::size_t size() const { return knots.size(); }
};

template <typename Scalar>
Vector<Scalar> interpolate(const InterpolatedPath<Scalar> &path, Scalar t) {
    if (path.knots.empty() || path.knots.size() != path.values.size())
        throw ValidationError("path", "knots and values must be nonempty and paired");
    if (t < path.knots.front() || t > path.knots.back())
        throw OutOfRange("time outside the interpolated range");
    const auto it = std::upper_bound(path.knots.begin(), path.knots.end(), t);
    const auto k = static_cast<std::size_t>(std::distance(path.knots.begin(), it)) - 1;
    if (path.knots[k] == t || k + 1 == path.knots.size())
        return path.values[k];
    const Scalar frac = (t - path.knots[k]) / (path.knots[k + 1] - path.knots[k]);
    return path.values[k] + (path.values[k + 1] - path.values[k]) * frac;
}

/// Largest m with T_{n+m} <= T_n + horizon, limited to the recorded knots.
template <typename Scalar>
std::size_t horizon_rounds(std::span<const Scalar> knots, std::size_t n_start, Scalar horizon) {
    if (n_start >= knots.size())
        throw OutOfRange("start round beyond the recorded path");
    const Scalar limit = knots[n_start] + horizon;
    std::size_t m = 0;
    while (n_start + m + 1 < knots.size() && knots[n_start + m + 1] <= limit)
        ++m;
    return m;
}

/// |w_bar(T_{n+m}) - w^{T_n}(T_{n+m})| for m = 0..m_horizon, where the ODE
/// solution starts from the aggregate at T_n.
template <typename Scalar, typename Rhs>
std::vector<Scalar> tracking_error(const InterpolatedPath<Scalar> &path, const Rhs &rhs,
                                   std::size_t n_start, std::size_t m_horizon,
                                   Scalar h_max = Scalar(1e-2)) {
    if (n_start + m_horizon >= path.knots.size())
        throw OutOfRange("tracking horizon extends past the recorded path");
    const std::span<const Scalar> times(path.knots.data() + n_start, m_horizon + 1);
    const auto traj = integrate(rhs, path.values[n_start], times.front(), times, h_max);
    std::vector<Scalar> err(m_horizon + 1);
    for (std::size_t m = 0; m <= m_horizon; ++m)
        err[m] = (path.values[n_start + m] - traj.values[m]).norm();
    return err;
}

template <typename Scalar, typename DerivedP>
std::vector<Scalar> tracking_error(const InterpolatedPath<Scalar> &path,
                                   const Eigen::MatrixBase<DerivedP> &p,
                                   const std::vector<RegressionTask<Scalar>> &tasks,
                                   std::size_t n_start, std::size_t m_horizon,
                                   Scalar h_max = Scalar(1e-2)) {
    const RegressionOde<Scalar> rhs(Vector<Scalar>(p), tasks);
    return tracking_error(path, rhs, n_start, m_horizon, h_max);
}

} // namespace fedsa
