#pragma once

#include <stdexcept>

namespace notmiwae {

// Shape/broadcast violations in tensor ops.
class ShapeError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Misuse of the tape: backward on non-scalars, detached tensors, double backward.
class AutodiffError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Domain violations (non-positive std, non-binary mask, bad rates, ...).
class ValueError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite quantities where finiteness is a contract (NaN loss abort).
class NumericalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File-format and filesystem failures.
class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid experiment configuration.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace notmiwae
