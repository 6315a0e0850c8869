#pragma once

#include <stdexcept>
#include <string>

namespace mmft {

/// Bad argument, bad configuration or violated precondition. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operand shapes do not fit the operation.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A NaN or Inf showed up where only finite values are allowed.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Misuse of the autodiff graph (non-scalar root, graph already consumed).
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// File system or format failure. Maps to CLI exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mmft
