#pragma once

#include <stdexcept>
#include <string>

namespace fscil {

// Error taxonomy shared across the library. All kinds derive from
// std::runtime_error so callers can catch broadly or per kind.

// Invalid configuration: bad shapes, incompatible sizes, bad hyperparameters.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-contract input data (labels out of range, missing classes).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An API precondition the caller must uphold was violated.
struct ContractViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerically degenerate input (zero-norm vector where a direction is required).
struct DegenerateInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Corrupt or truncated serialized data.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
struct TrainingDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reports that cannot be compared against each other.
struct ComparisonError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fscil
