#pragma once
#include <stdexcept>
#include <string>

namespace afrelay {

// Bad configuration values, unknown keys, malformed budgets. CLI exit code 1.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Wrong multiplier kind handed to a solver, or similar API misuse.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Oracle complexity guard.
class SizeError : public std::length_error {
public:
    using std::length_error::length_error;
};

// Base of every numerical failure. CLI exit code 2.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BracketError : public SolverError {
public:
    using SolverError::SolverError;
};

class ConvergenceError : public SolverError {
public:
    ConvergenceError(const std::string& what, double best_iterate)
        : SolverError(what), best_(best_iterate) {}
    double best_iterate() const noexcept { return best_; }

private:
    double best_;
};

class InfeasibleError : public SolverError {
public:
    using SolverError::SolverError;
};

class NumericalError : public SolverError {
public:
    using SolverError::SolverError;
};

} // namespace afrelay
