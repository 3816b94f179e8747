#pragma once

#include <stdexcept>
#include <string>

namespace moneylife {

// Invalid user-supplied configuration. Maps to CLI exit code 1.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Model state broke one of its invariants; the run must be aborted.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Numerical analysis could not produce a result (too few scales, degenerate
// input, ...). Maps to CLI exit code 3.
class AnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateInputError : public AnalysisError {
public:
    using AnalysisError::AnalysisError;
};

} // namespace moneylife
