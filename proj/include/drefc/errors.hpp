// Exception types shared across the library.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace drefc {

struct argument_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerical integration produced a non-finite state; carries the failing step.
struct integration_error : std::runtime_error {
  integration_error(const std::string& what, std::size_t step)
      : std::runtime_error(what), step(step) {}
  std::size_t step;
};

struct singular_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct solver_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The control problem admits no feasible input; carries the best frequency
// margin any admissible input can achieve.
struct infeasible_error : std::runtime_error {
  infeasible_error(const std::string& what, double max_achievable_margin)
      : std::runtime_error(what),
        max_achievable_margin(max_achievable_margin) {}
  double max_achievable_margin;
};

}  // namespace drefc
