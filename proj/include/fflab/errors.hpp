#pragma once

#include <stdexcept>
#include <string>

namespace fflab {

/// Malformed or inconsistent input data. Maps to CLI exit code 1.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure: rank deficiency, degenerate input, non-convergence.
/// Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File system failures. Maps to CLI exit code 3.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fflab
