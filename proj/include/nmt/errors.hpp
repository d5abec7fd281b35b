// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace nmt {

// Base class for all toolkit errors. Subcommands catch this at the top
// level and turn it into a nonzero exit with the message on stderr.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor/operation shape disagreements.
struct DimensionError : Error {
    using Error::Error;
};

// Out-of-range ids (vocabulary overflow, bad token ids).
struct IndexError : Error {
    using Error::Error;
};

// Malformed or unusable input data (empty corpus, misaligned files).
struct DataError : Error {
    using Error::Error;
};

// Invalid configuration (bad hyperparameters, missing required refs).
struct ConfigError : Error {
    using Error::Error;
};

// API contract violations between modules (key/shape mismatches).
struct ContractError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required (NaN loss/gradients).
struct NumericError : Error {
    using Error::Error;
};

// Filesystem failures.
struct IoError : Error {
    using Error::Error;
};

// A computation expected to be deterministic produced differing results.
struct DeterminismError : Error {
    using Error::Error;
};

} // namespace nmt
