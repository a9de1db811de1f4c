#pragma once

#include <stdexcept>
#include <string>

namespace cchar {

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RangeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Crossing isolation did not converge within the refinement budget.
struct ResolutionError : NumericalError {
    using NumericalError::NumericalError;
};

/// A one-sided limit did not stabilize when the probe step was halved.
struct StabilityError : NumericalError {
    using NumericalError::NumericalError;
};

/// Two independent computations of the same quantity disagree.
struct ConsistencyError : NumericalError {
    ConsistencyError(const std::string& what, double a, double b)
        : NumericalError(what), value_a(a), value_b(b) {}
    double value_a;
    double value_b;
};

struct UnsupportedNormalFormError : NumericalError {
    using NumericalError::NumericalError;
};

struct IntegratorError : NumericalError {
    using NumericalError::NumericalError;
};

struct InvariantViolation : NumericalError {
    using NumericalError::NumericalError;
};

/// An iteration table is not tabulated deeply enough for the request.
struct DepthError : NumericalError {
    DepthError(const std::string& what, long required)
        : NumericalError(what), required_m(required) {}
    long required_m;
};

} // namespace cchar
