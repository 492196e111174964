#pragma once

#include <stdexcept>
#include <string>

namespace stegodetect {

// Error taxonomy shared across the library. The CLI maps each type to a
// distinct exit code (see tools/).

// Caller misuse: bad arguments, violated preconditions, malformed flags.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor dimension mismatches. Messages name both offending shapes.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (corpus files, token ids, labels).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem / stream failures. Messages include the path.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure: NaN/Inf detected, training divergence.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace stegodetect
