#pragma once

#include <stdexcept>
#include <string>

namespace ia {

// Base class for everything this library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or extent disagreement between operands.
struct DimensionError : Error {
  using Error::Error;
};

// Invalid configuration value (bad sigma, bad conv geometry, bad config file).
struct ConfigError : Error {
  using Error::Error;
};

// Out-of-range index (labels, channels, positions).
struct IndexError : Error {
  using Error::Error;
};

// Numeric failure (zero-norm embedding, non-finite values).
struct NumericError : Error {
  using Error::Error;
};

// API misuse (backward on a loss that is not on the tape).
struct UsageError : Error {
  using Error::Error;
};

// Training diverged.
struct TrainingError : Error {
  using Error::Error;
};

// Retrieval evaluation is ill-posed (query identity missing from gallery).
struct EvalError : Error {
  using Error::Error;
};

// File format or filesystem failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace ia
