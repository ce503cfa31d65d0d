#pragma once

#include <stdexcept>

namespace gpe {

/// A guaranteed inequality failed at runtime. This indicates a bug, not bad input.
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training stopped with a diverged status where the caller required convergence.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gpe
