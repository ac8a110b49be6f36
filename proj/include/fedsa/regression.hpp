#pragma once

#include "fedsa/core.hpp"
#include "fedsa/rng.hpp"

#include <cmath>
#include <random>
#include <span>
#include <vector>

namespace fedsa {

/// One client's linear-Gaussian data source: y = x^T w_true + eps with
/// x ~ N(0, sigma_x^2 I) and eps ~ N(0, sigma_eps^2).
template <typename Scalar = double>
struct RegressionTask {
    Vector<Scalar> w_true;
    Scalar sigma_x = Scalar(1);
    Scalar sigma_eps = Scalar(0);
    Index n_samples = 1;

    Index dim() const { return w_true.size(); }

    void validate() const {
        if (w_true.size() < 1)
            throw ValidationError("task.d", "dimension must be at least 1");
        if (!(sigma_x > Scalar(0)))
            throw ValidationError("task.sigma_x", "must be positive");
        if (!(sigma_eps >= Scalar(0)))
            throw ValidationError("task.sigma_eps", "must be non-negative");
        if (n_samples < 1)
            throw ValidationError("task.n_samples", "must be at least 1");
    }
};

/// Fixed per-client sample. Features are stored one column per sample.
template <typename Scalar = double>
struct RegressionDataset {
    Matrix<Scalar> features; // d x n
    Vector<Scalar> targets;  // n

    Index size() const { return targets.size(); }
    Index dim() const { return features.rows(); }
};

/// sigma_eps such that sigma_x^2 |w|^2 / sigma_eps^2 = 10^(snr_db / 10).
template <typename Scalar, typename Derived>
Scalar noise_sigma_from_snr(Scalar sigma_x, const Eigen::MatrixBase<Derived> &w_true,
                            Scalar snr_db) {
    const Scalar norm = w_true.norm();
    if (!(norm > Scalar(0)))
        throw ZeroSignal("true parameter vector has zero norm");
    return sigma_x * norm / std::pow(Scalar(10), snr_db / Scalar(20));
}

template <typename Scalar>
RegressionDataset<Scalar> generate_regression_data(const RegressionTask<Scalar> &task,
                                                   Rng &rng) {
    task.validate();
    const Index d = task.dim();
    const Index n = task.n_samples;
    std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
    RegressionDataset<Scalar> data;
    data.features.resize(d, n);
    data.targets.resize(n);
    for (Index k = 0; k < n; ++k) {
        for (Index j = 0; j < d; ++j)
            data.features(j, k) = task.sigma_x * normal(rng);
        const Scalar eps = task.sigma_eps * normal(rng);
        data.targets[k] = data.features.col(k).dot(task.w_true) + eps;
    }
    return data;
}

/// Gradient of (y - x^T w)^2 with respect to w.
template <typename DerivedW, typename DerivedX>
auto regression_sample_grad(const Eigen::MatrixBase<DerivedW> &w,
                            const Eigen::MatrixBase<DerivedX> &x,
                            typename DerivedW::Scalar y) {
    using Scalar = typename DerivedW::Scalar;
    if (w.size() != x.size())
        throw DimensionMismatch("parameter and feature dimensions differ");
    const Scalar residual = y - x.dot(w);
    return Vector<Scalar>(Scalar(-2) * residual * x);
}

template <typename Scalar, typename Derived>
Vector<Scalar> regression_minibatch_grad(const Eigen::MatrixBase<Derived> &w,
                                         const RegressionDataset<Scalar> &data,
                                         std::span<const Index> batch) {
    if (batch.empty())
        throw EmptyBatch();
    if (w.size() != data.dim())
        throw DimensionMismatch("parameter and feature dimensions differ");
    Vector<Scalar> grad = Vector<Scalar>::Zero(w.size());
    for (const Index k : batch) {
        if (k < 0 || k >= data.size())
            throw OutOfRange("batch index out of range");
        const Scalar residual = data.targets[k] - data.features.col(k).dot(w);
        grad.noalias() -= Scalar(2) * residual * data.features.col(k);
    }
    return grad / Scalar(batch.size());
}

/// h(w) = -grad E f(w, xi) = 2 sigma_x^2 (w_true - w) for the Gaussian design.
template <typename Scalar, typename Derived>
Vector<Scalar> regression_population_h(const RegressionTask<Scalar> &task,
                                       const Eigen::MatrixBase<Derived> &w) {
    if (w.size() != task.dim())
        throw DimensionMismatch("parameter dimension differs from task");
    return Scalar(2) * task.sigma_x * task.sigma_x * (task.w_true - w);
}

/// Zero of sum_i p_i h_i(w) for isotropic Gaussian designs.
template <typename Scalar, typename DerivedP>
Vector<Scalar> closed_form_optimum(std::span<const RegressionTask<Scalar>> tasks,
                                   const Eigen::MatrixBase<DerivedP> &p) {
    if (tasks.empty())
        throw ValidationError("tasks", "at least one task required");
    if (static_cast<Index>(tasks.size()) != p.size())
        throw DimensionMismatch("weight count differs from task count");
    const Index d = tasks.front().dim();
    Scalar weight_sum(0);
    Vector<Scalar> acc = Vector<Scalar>::Zero(d);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].dim() != d)
            throw DimensionMismatch("tasks disagree on dimension");
        const Scalar wi = p[static_cast<Index>(i)] * tasks[i].sigma_x * tasks[i].sigma_x;
        weight_sum += wi;
        acc += wi * tasks[i].w_true;
    }
    if (!(weight_sum > Scalar(0)))
        throw SingularSystem("weighted feature variance is zero");
    return acc / weight_sum;
}

template <typename Scalar, typename DerivedP>
Vector<Scalar> closed_form_optimum(const std::vector<RegressionTask<Scalar>> &tasks,
                                   const Eigen::MatrixBase<DerivedP> &p) {
    return closed_form_optimum(std::span<const RegressionTask<Scalar>>(tasks), p);
}

/// Sufficient statistics of a dataset. Since the loss is quadratic, they give
/// the exact mean gradient over the dataset, i.e. the conditional mean of a
/// mini-batch gradient drawn uniformly with replacement.
template <typename Scalar = double>
struct RegressionMoments {
    Matrix<Scalar> second; // (1/n) X X^T
    Vector<Scalar> cross;  // (1/n) X y

    static RegressionMoments of(const RegressionDataset<Scalar> &data) {
        const Scalar n = Scalar(data.size());
        return {data.features * data.features.transpose() / n,
                data.features * data.targets / n};
    }

    /// -grad of the dataset-mean loss.
    template <typename Derived>
    Vector<Scalar> h(const Eigen::MatrixBase<Derived> &w) const {
        return Scalar(2) * (cross - second * w);
    }
};

} // namespace fedsa
