#pragma once

#include <stdexcept>
#include <string>

namespace meshreg {

/// Invalid parameters or preconditions supplied by the caller.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// File could not be read, written or decoded.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Degenerate or inconsistent mesh geometry.
class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The solver energy kept growing or produced non-finite values.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace meshreg
