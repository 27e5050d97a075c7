#pragma once

#include <stdexcept>
#include <string>

namespace coordfree {

/// Argument outside the valid domain of an operation (bad index, mismatched
/// spaces, point off the grid).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An operation was called on inputs that violate its documented precondition.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Work would exceed the configured memory or search budget.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Integration produced non-finite values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A closed loop reached a state with no admissible input.
class BlockingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed scenario or artifact file.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace coordfree
