#pragma once

#include <stdexcept>
#include <string>

namespace epsassoc {

// Bad input: malformed files, inconsistent shapes, incompatible options.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The numerics failed: singular information, divergence, non-finite objective.
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace epsassoc
