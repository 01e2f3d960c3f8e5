#pragma once

#include <stdexcept>
#include <string>

namespace netinfer {

/// Input or configuration does not satisfy a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite or otherwise unusable number.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A guaranteed mathematical property (e.g. MM ascent) was violated.
class InternalConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace netinfer
