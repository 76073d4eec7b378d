#pragma once

#include <stdexcept>
#include <string>

namespace dbforge {

// Base for everything raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad arguments to an operation: labels out of range, empty input,
// dimension mismatch, non-distribution joints, all-zero weights.
struct ValidationError : Error {
    using Error::Error;
};

// Invalid configuration (CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

// Filesystem problems (CLI exit code 3).
struct IoError : Error {
    using Error::Error;
};

// Malformed file content; message carries the offending line/row.
struct FormatError : IoError {
    using IoError::IoError;
};

// Training failures, e.g. non-finite loss (CLI exit code 4).
struct TrainingError : Error {
    using Error::Error;
};

} // namespace dbforge
