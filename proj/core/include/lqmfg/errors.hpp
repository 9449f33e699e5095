#pragma once

#include <stdexcept>
#include <string>

namespace lqmfg {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent user input (config files, mismatched grids,
/// out-of-order ladders).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input outside the mathematical domain of an operation (negative samples,
/// envelope formulas below their small-L threshold).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A scalar root-find failed to converge. Under a validated coefficient set
/// this signals corrupted inputs, not a user error.
class NumericError : public Error {
public:
    using Error::Error;
};

/// The BVP shooting / Picard iteration did not reach its residual tolerance.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Step-size underflow while integrating through the terminal layer.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// A provable property failed at runtime; indicates an implementation bug
/// rather than bad input.
class PropertyError : public Error {
public:
    using Error::Error;
};

}  // namespace lqmfg
