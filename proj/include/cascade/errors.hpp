#pragma once

#include <stdexcept>
#include <string>

namespace cascade {

// Bad input: malformed files, out-of-range parameters, non-physical states.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The input was fine but the numerics did not work out (singular systems,
// failed fits).
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cascade
