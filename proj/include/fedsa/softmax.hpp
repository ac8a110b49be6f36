#pragma once

#include "fedsa/core.hpp"
#include "fedsa/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace fedsa {

/// Gaussian-mixture classification source: label y from the client's class
/// proportions, then x ~ N(class_means[y], sigma_x^2 I).
template <typename Scalar = double>
struct SoftmaxTask {
    Index classes = 2;
    Index dim = 1;
    std::vector<Vector<Scalar>> class_means;
    Scalar sigma_x = Scalar(1);
    Index n_samples = 1;

    void validate() const {
        if (classes < 2)
            throw ValidationError("task.classes", "need at least two classes");
        if (static_cast<Index>(class_means.size()) != classes)
            throw ValidationError("task.class_means", "one mean per class required");
        for (const auto &m : class_means)
            if (m.size() != dim)
                throw DimensionMismatch("class mean dimension differs from task");
        for (std::size_t a = 0; a < class_means.size(); ++a)
            for (std::size_t b = a + 1; b < class_means.size(); ++b)
                if (class_means[a] == class_means[b])
                    throw ValidationError("task.class_means", "means must be distinct");
        if (!(sigma_x > Scalar(0)))
            throw ValidationError("task.sigma_x", "must be positive");
        if (n_samples < 1)
            throw ValidationError("task.n_samples", "must be at least 1");
    }
};

/// K means spread evenly on a circle of the given radius in the first two
/// coordinates (on a line when dim == 1).
template <typename Scalar = double>
std::vector<Vector<Scalar>> circle_class_means(Index classes, Index dim, Scalar radius) {
    std::vector<Vector<Scalar>> means;
    for (Index k = 0; k < classes; ++k) {
        Vector<Scalar> m = Vector<Scalar>::Zero(dim);
        if (dim == 1) {
            m[0] = radius * Scalar(k);
        } else {
            const Scalar angle = Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(k) / Scalar(classes);
            m[0] = radius * std::cos(angle);
            m[1] = radius * std::sin(angle);
        }
        means.push_back(std::move(m));
    }
    return means;
}

/// Linear classifier logits z = W x + b.
template <typename Scalar = double>
struct SoftmaxParams {
    Matrix<Scalar> W; // K x d
    Vector<Scalar> b; // K

    static SoftmaxParams zeros(Index classes, Index dim) {
        return {Matrix<Scalar>::Zero(classes, dim), Vector<Scalar>::Zero(classes)};
    }

    Index classes() const { return W.rows(); }
    Index dim() const { return W.cols(); }

    static Index packed_size(Index classes, Index dim) { return classes * (dim + 1); }

    /// Column-major W followed by b.
    Vector<Scalar> pack() const {
        Vector<Scalar> v(packed_size(classes(), dim()));
        v.head(W.size()) = Eigen::Map<const Vector<Scalar>>(W.data(), W.size());
        v.tail(b.size()) = b;
        return v;
    }

    template <typename Derived>
    static SoftmaxParams unpack(const Eigen::MatrixBase<Derived> &v, Index classes, Index dim) {
        if (v.size() != packed_size(classes, dim))
            throw DimensionMismatch("packed parameter length differs from K(d+1)");
        SoftmaxParams out;
        const Vector<Scalar> flat = v;
        out.W = Eigen::Map<const Matrix<Scalar>>(flat.data(), classes, dim);
        out.b = flat.tail(classes);
        return out;
    }

    template <typename Derived>
    Vector<Scalar> logits(const Eigen::MatrixBase<Derived> &x) const {
        return W * x + b;
    }
};

template <typename Scalar = double>
struct ClassificationDataset {
    Matrix<Scalar> features; // d x n
    std::vector<int> labels; // 0-based

    Index size() const { return static_cast<Index>(labels.size()); }
    Index dim() const { return features.rows(); }
};

template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived> &z) {
    using Scalar = typename Derived::Scalar;
    const Vector<Scalar> shifted = z.array() - z.maxCoeff();
    const Vector<Scalar> e = shifted.array().exp();
    return e / e.sum();
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived> &z) {
    const auto top = z.maxCoeff();
    return top + std::log((z.array() - top).exp().sum());
}

/// -log s_y(x) for logits W x + b.
template <typename Scalar, typename Derived>
Scalar cross_entropy_loss(const SoftmaxParams<Scalar> &params,
                          const Eigen::MatrixBase<Derived> &x, int y) {
    if (y < 0 || y >= params.classes())
        throw OutOfRange("label outside 0..K-1");
    const Vector<Scalar> z = params.logits(x);
    return log_sum_exp(z) - z[y];
}

template <typename Scalar>
SoftmaxParams<Scalar> softmax_minibatch_grad(const SoftmaxParams<Scalar> &params,
                                             const ClassificationDataset<Scalar> &data,
                                             std::span<const Index> batch) {
    if (batch.empty())
        throw EmptyBatch();
    if (params.dim() != data.dim())
        throw DimensionMismatch("parameter and feature dimensions differ");
    auto grad = SoftmaxParams<Scalar>::zeros(params.classes(), params.dim());
    for (const Index k : batch) {
        if (k < 0 || k >= data.size())
            throw OutOfRange("batch index out of range");
        const auto x = data.features.col(k);
        Vector<Scalar> r = softmax(params.logits(x));
        r[data.labels[static_cast<std::size_t>(k)]] -= Scalar(1);
        grad.W.noalias() += r * x.transpose();
        grad.b += r;
    }
    const Scalar inv = Scalar(1) / Scalar(batch.size());
    grad.W *= inv;
    grad.b *= inv;
    return grad;
}

template <typename Scalar>
ClassificationDataset<Scalar>
generate_classification_data(const SoftmaxTask<Scalar> &task,
                             std::span<const Scalar> class_proportions, Rng &rng) {
    task.validate();
    if (static_cast<Index>(class_proportions.size()) != task.classes)
        throw DimensionMismatch("one proportion per class required");
    Scalar total(0);
    for (const Scalar q : class_proportions) {
        if (!(q >= Scalar(0)))
            throw ValidationError("class_proportions", "must be non-negative");
        total += q;
    }
    if (std::abs(total - Scalar(1)) > Scalar(1e-9))
        throw ValidationError("class_proportions", "must sum to one");

    std::discrete_distribution<int> pick(class_proportions.begin(), class_proportions.end());
    std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
    ClassificationDataset<Scalar> data;
    data.features.resize(task.dim, task.n_samples);
    data.labels.resize(static_cast<std::size_t>(task.n_samples));
    for (Index k = 0; k < task.n_samples; ++k) {
        const int y = pick(rng);
        data.labels[static_cast<std::size_t>(k)] = y;
        for (Index j = 0; j < task.dim; ++j)
            data.features(j, k) = task.class_means[static_cast<std::size_t>(y)][j] +
                                  task.sigma_x * normal(rng);
    }
    return data;
}

template <typename Scalar>
ClassificationDataset<Scalar>
generate_classification_data(const SoftmaxTask<Scalar> &task,
                             const std::vector<Scalar> &class_proportions, Rng &rng) {
    return generate_classification_data(task, std::span<const Scalar>(class_proportions), rng);
}

struct LossAccuracy {
    double loss = 0.0;
    double accuracy = 0.0;
    Index count = 0;
};

/// Mean loss and accuracy over the samples whose label passes `keep`.
template <typename Scalar, typename Keep>
LossAccuracy evaluate(const SoftmaxParams<Scalar> &params,
                      const ClassificationDataset<Scalar> &data, Keep keep) {
    LossAccuracy out;
    double loss = 0.0;
    Index correct = 0;
    for (Index k = 0; k < data.size(); ++k) {
        const int y = data.labels[static_cast<std::size_t>(k)];
        if (!keep(y))
            continue;
        const Vector<Scalar> z = params.logits(data.features.col(k));
        loss += double(log_sum_exp(z) - z[y]);
        Index arg = 0;
        z.maxCoeff(&arg);
        correct += (arg == y);
        ++out.count;
    }
    if (out.count > 0) {
        out.loss = loss / double(out.count);
        out.accuracy = double(correct) / double(out.count);
    }
    return out;
}

template <typename Scalar>
LossAccuracy evaluate(const SoftmaxParams<Scalar> &params,
                      const ClassificationDataset<Scalar> &data) {
    return evaluate(params, data, [](int) { return true; });
}

} // namespace fedsa
