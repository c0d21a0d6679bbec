#pragma once

#include <stdexcept>
#include <string>

namespace hgad {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tensor dimension or shape mismatch.
struct ShapeError : Error {
    using Error::Error;
};

/// Invalid input data (bad CSV cell, degenerate rows, label values, ...).
struct DataError : Error {
    using Error::Error;
};

/// Invalid configuration (bad fractions, impossible ablation combos, ...).
struct ConfigError : Error {
    using Error::Error;
};

/// Filesystem failures.
struct IoError : Error {
    using Error::Error;
};

/// Training produced a non-finite loss.
struct DivergenceError : Error {
    using Error::Error;
};

/// Misuse of the gradient tape (stale tape, non-scalar loss, missing grads).
struct TapeError : Error {
    using Error::Error;
};

}  // namespace hgad
