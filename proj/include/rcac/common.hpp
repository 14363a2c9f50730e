#pragma once

#include <stdexcept>
#include <string>

namespace rcac {

// Bad shapes, bad hyperparameters, malformed files.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API misuse: sampling an empty buffer, stepping a finished episode.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf encountered in a forward pass, backward pass or optimizer step.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bugs: tape/parameter mismatches and other broken internal contracts.
struct InternalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rcac
