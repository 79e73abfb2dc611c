#pragma once

#include <stdexcept>
#include <string>

namespace koopcert {

/// Caller passed arguments that violate a precondition (maps to CLI exit code 2).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation produced non-finite values, diverged, or could not be solved
/// to the required accuracy (maps to CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& what, double time)
        : NumericalError(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

class RankDeficiencyError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SamplingError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SizeError : public UsageError {
public:
    using UsageError::UsageError;
};

class MeshError : public UsageError {
public:
    using UsageError::UsageError;
};

class AssemblyError : public UsageError {
public:
    using UsageError::UsageError;
};

}  // namespace koopcert
