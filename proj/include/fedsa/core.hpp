#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fedsa {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A configuration or argument value violates a documented constraint.
/// `field()` carries a dotted path such as `schedules[2].delta`.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string &message)
        : Error(field + ": " + message), field_(std::move(field)) {}

    const std::string &field() const noexcept { return field_; }

private:
    std::string field_;
};

class DominanceViolation : public Error {
public:
    using Error::Error;
};

class NoDominantSchedule : public Error {
public:
    using Error::Error;
};

class ZeroSignal : public Error {
public:
    using Error::Error;
};

class EmptyBatch : public Error {
public:
    EmptyBatch() : Error("mini-batch is empty") {}
};

class SingularSystem : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class OutOfRange : public Error {
public:
    using Error::Error;
};

class StepTooLarge : public Error {
public:
    using Error::Error;
};

class RequiresAnalyticGradient : public Error {
public:
    RequiresAnalyticGradient()
        : Error("noise extraction needs an exact conditional-mean gradient") {}
};

class IoFailure : public Error {
public:
    using Error::Error;
};

/// A client iterate left the finite range.
class NonFiniteIterate : public Error {
public:
    NonFiniteIterate(std::size_t client, std::int64_t step)
        : Error("non-finite iterate at client " + std::to_string(client) +
                ", global step " + std::to_string(step)),
          client_(client), step_(step) {}

    std::size_t client() const noexcept { return client_; }
    std::int64_t step() const noexcept { return step_; }

private:
    std::size_t client_;
    std::int64_t step_;
};

} // namespace fedsa
