#pragma once

#include <stdexcept>
#include <string>

namespace espace {

// Base for everything thrown by this library. CLI exit codes map onto the
// subclasses: usage/config -> 1, data/shape/format -> 2, numerical -> 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension or structural mismatch between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Input data violates a documented precondition (asymmetry, empty
// calibration, undefined metric, missing stage artifact, ...).
class DataError : public Error {
public:
    using Error::Error;
};

// Malformed binary tensor file or report file.
class FormatError : public Error {
public:
    using Error::Error;
};

// Bad or missing run-configuration key.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A selection policy cannot be satisfied (e.g. no admissible rank).
class PolicyError : public Error {
public:
    using Error::Error;
};

// Stale trace / mismatched model state.
class StateError : public Error {
public:
    using Error::Error;
};

// Divergence or nonfinite quantities during training.
class TrainingError : public Error {
public:
    using Error::Error;
};

// Iterative solver failed to converge or produced nonfinite output.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace espace
