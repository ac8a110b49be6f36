#pragma once

#include "fedsa/core.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fedsa {

enum class ScheduleKind { Tapering, Constant };

/// Power-law step size a_n = c / (n + 1)^delta, or a constant c.
///
/// Tapering schedules must satisfy c > 0 and 3/4 < delta <= 1, which gives
/// sum a_n = inf and sum a_n^2 < inf. `tapering(..., allow_unsafe = true)`
/// accepts any delta > 0 and marks the schedule as outside that band.
template <typename Scalar = double>
class StepSizeSchedule {
public:
    static constexpr double kDeltaLower = 0.75;
    static constexpr double kDeltaUpper = 1.0;

    static bool admissible_delta(Scalar delta) {
        return delta > Scalar(kDeltaLower) && delta <= Scalar(kDeltaUpper);
    }

    static StepSizeSchedule tapering(Scalar c, Scalar delta,
                                     bool allow_unsafe = false) {
        if (!(c > Scalar(0)) || !std::isfinite(double(c)))
            throw ValidationError("c", "step-size scale must be positive");
        if (!admissible_delta(delta)) {
            if (!allow_unsafe)
                throw ValidationError(
                    "delta", "exponent " + std::to_string(double(delta)) +
                                 " outside the admissible band (0.75, 1]");
            if (!(delta > Scalar(0)))
                throw ValidationError("delta", "exponent must be positive");
        }
        return StepSizeSchedule(ScheduleKind::Tapering, c, delta);
    }

    static StepSizeSchedule constant(Scalar c) {
        if (!(c > Scalar(0)) || !std::isfinite(double(c)))
            throw ValidationError("constant", "step size must be positive");
        return StepSizeSchedule(ScheduleKind::Constant, c, Scalar(0));
    }

    ScheduleKind kind() const noexcept { return kind_; }
    bool is_tapering() const noexcept { return kind_ == ScheduleKind::Tapering; }
    Scalar c() const noexcept { return c_; }
    Scalar delta() const noexcept { return delta_; }

    /// False for tapering schedules built with `allow_unsafe` outside the band.
    bool theory_supported() const noexcept {
        return kind_ == ScheduleKind::Constant || admissible_delta(delta_);
    }

    Scalar operator()(std::int64_t n) const {
        if (kind_ == ScheduleKind::Constant)
            return c_;
        // shifted by one so that n = 0 is defined
        return c_ / std::pow(Scalar(n + 1), delta_);
    }

    friend bool operator==(const StepSizeSchedule &,
                           const StepSizeSchedule &) = default;

private:
    StepSizeSchedule(ScheduleKind kind, Scalar c, Scalar delta)
        : kind_(kind), c_(c), delta_(delta) {}

    ScheduleKind kind_;
    Scalar c_;
    Scalar delta_;
};

template <typename Scalar>
Scalar step_size(const StepSizeSchedule<Scalar> &sched, std::int64_t n) {
    return sched(n);
}

/// True when `a` dominates `b` eventually: a_n >= b_n for all large n.
template <typename Scalar>
bool dominates(const StepSizeSchedule<Scalar> &a,
               const StepSizeSchedule<Scalar> &b) {
    if (a.delta() != b.delta())
        return a.delta() < b.delta();
    return a.c() >= b.c();
}

/// lim a_n^(i) / a_n^(ref), evaluated in closed form.
template <typename Scalar>
Scalar limiting_ratio(const StepSizeSchedule<Scalar> &sched_i,
                      const StepSizeSchedule<Scalar> &sched_ref) {
    if (!sched_i.is_tapering() || !sched_ref.is_tapering())
        throw ValidationError("schedule",
                              "limiting ratios are defined for tapering schedules");
    if (!dominates(sched_ref, sched_i))
        throw DominanceViolation("reference schedule is dominated; ratio diverges");
    if (sched_i.delta() > sched_ref.delta())
        return Scalar(0);
    return sched_i.c() / sched_ref.c();
}

template <typename Scalar = double>
struct LimitingWeights {
    Vector<Scalar> p;
    std::size_t ref_index = 0;
};

/// Picks the dominant schedule (smallest delta, ties by largest c, then
/// lowest index) and returns every client's limiting weight relative to it.
template <typename Scalar>
LimitingWeights<Scalar>
validate_and_rank(std::span<const StepSizeSchedule<Scalar>> schedules) {
    if (schedules.empty())
        throw ValidationError("schedules", "at least one schedule required");
    for (std::size_t i = 0; i < schedules.size(); ++i)
        if (!schedules[i].is_tapering())
            throw ValidationError("schedules[" + std::to_string(i) + "]",
                                  "limiting weights require tapering schedules");

    std::size_t ref = 0;
    for (std::size_t i = 1; i < schedules.size(); ++i) {
        const auto &cand = schedules[i];
        const auto &best = schedules[ref];
        if (cand.delta() < best.delta() ||
            (cand.delta() == best.delta() && cand.c() > best.c()))
            ref = i;
    }

    LimitingWeights<Scalar> out;
    out.ref_index = ref;
    out.p.resize(static_cast<Index>(schedules.size()));
    for (std::size_t i = 0; i < schedules.size(); ++i)
        out.p[static_cast<Index>(i)] = limiting_ratio(schedules[i], schedules[ref]);
    out.p[static_cast<Index>(ref)] = Scalar(1);
    return out;
}

template <typename Scalar>
LimitingWeights<Scalar>
validate_and_rank(const std::vector<StepSizeSchedule<Scalar>> &schedules) {
    return validate_and_rank(std::span<const StepSizeSchedule<Scalar>>(schedules));
}

/// Event times T_0 = 0, T_n = sum_{k=1}^{nN} a_k of the reference schedule.
template <typename Scalar>
std::vector<Scalar> event_times(const StepSizeSchedule<Scalar> &ref,
                                std::int64_t period, std::int64_t n_rounds) {
    if (period < 1)
        throw ValidationError("N", "aggregation period must be positive");
    if (n_rounds < 0)
        throw ValidationError("rounds", "round count must be non-negative");
    std::vector<Scalar> times;
    times.reserve(static_cast<std::size_t>(n_rounds) + 1);
    times.push_back(Scalar(0));
    Scalar acc(0);
    std::int64_t k = 1;
    for (std::int64_t n = 1; n <= n_rounds; ++n) {
        for (; k <= n * period; ++k)
            acc += ref(k);
        times.push_back(acc);
    }
    return times;
}

} // namespace fedsa
