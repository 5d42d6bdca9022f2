#pragma once

#include <stdexcept>
#include <string>

namespace nis {

// Bad or inconsistent user-supplied configuration (file contents, splits, ratios).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A documented precondition was violated by the caller.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// Non-finite values or other numeric failures during computation.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem / serialization failures.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace nis
