#pragma once

#include <stdexcept>
#include <string>

namespace kgrowth {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid run configuration; the message names the violated invariant.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Explicit scheme left its stability region (CFL breach, excessive clipping).
class StabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative sub-solver failed or produced non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kgrowth
