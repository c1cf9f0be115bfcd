#pragma once

#include <stdexcept>
#include <string>

namespace recore {

// Shape or extent mismatch between operands of a primitive.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A NaN or Inf appeared in a value, gradient or loss.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration (bad key, bad value, inconsistent settings).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation invoked in a state that does not allow it.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace recore
