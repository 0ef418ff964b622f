#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sdeinfer {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A sampled function value was not finite.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// Forward time not strictly after backward time.
class TemporalOrderError : public Error {
public:
    using Error::Error;
};

class OverflowError : public Error {
public:
    using Error::Error;
};

/// Linear solver failure (singular or ill-posed system).
class SolverError : public Error {
public:
    using Error::Error;
};

/// Coefficient evaluation produced unusable values.
class CoefficientError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Configuration validation failure; `field()` names the offending key path.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// The iterated parametrix kernels stopped decreasing.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::vector<double> term_norms)
        : Error(what), term_norms_(std::move(term_norms)) {}
    const std::vector<double>& term_norms() const noexcept { return term_norms_; }

private:
    std::vector<double> term_norms_;
};

class ChainError : public Error {
public:
    using Error::Error;
};

class SimulationError : public Error {
public:
    SimulationError(const std::string& what, std::size_t step)
        : Error(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class DegenerateLikelihoodError : public Error {
public:
    using Error::Error;
};

}  // namespace sdeinfer
