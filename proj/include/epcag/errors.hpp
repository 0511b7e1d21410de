#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace epcag {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A query needed data outside the stored window and no generator was
/// available (or allowed) to extend it.
class WindowExhausted : public Error {
public:
    using Error::Error;
};

/// A diagnostic was asked to scan a window too small to test anything.
class InsufficientWindow : public Error {
public:
    using Error::Error;
};

/// The adaptive integrator could not meet its tolerance.
class IntegratorFailure : public Error {
public:
    using Error::Error;
};

/// No exponential envelope fits the sampled transition norms.
class NoEnvelope : public Error {
public:
    using Error::Error;
};

/// Fixed-point iteration diverges (or is rejected up front).
class NonContractive : public Error {
public:
    using Error::Error;
};

/// The requested truncation tolerance cannot be met on the given window.
class TruncationBudget : public Error {
public:
    using Error::Error;
};

/// Iteration cap reached before the update dropped below tolerance.
class IterationLimit : public Error {
public:
    using Error::Error;
};

/// Problem-file validation failure; carries the path of the offending key.
class ValidationError : public Error {
public:
    ValidationError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// A certified hypothesis fails; `condition()` names it (C4, C6, ..., C9).
class ConditionFailure : public Error {
public:
    ConditionFailure(std::string condition, const std::string& what)
        : Error(condition + ": " + what), condition_(std::move(condition)) {}

    const std::string& condition() const noexcept { return condition_; }

private:
    std::string condition_;
};

} // namespace epcag
