#pragma once

#include <stdexcept>
#include <string>

namespace taprec {

// Error taxonomy used across the library. Everything derives from Error so
// callers can catch broadly; the CLI maps each subtype to a scoped message.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration value; the message names the offending field.
struct ConfigError : Error {
    using Error::Error;
};

// Array/feature shape inconsistencies.
struct DimensionError : Error {
    using Error::Error;
};

// Bad or inconsistent data (label sets, splits, corrupt records).
struct DataError : Error {
    using Error::Error;
};

// File format / filesystem failures.
struct IoError : Error {
    using Error::Error;
};

// Bundle carries the wrong head for the requested operation.
struct WrongHeadError : Error {
    using Error::Error;
};

// Non-finite loss during an optimisation loop; message carries epoch/step.
struct TrainingDivergedError : Error {
    using Error::Error;
};

}  // namespace taprec
