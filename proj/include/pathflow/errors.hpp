#pragma once

#include <stdexcept>
#include <string>

namespace pathflow {

// Bad input: mismatched group tags or grids, malformed weights, bad config.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical solver could not produce an answer (e.g. Sinkhorn did not converge).
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double last_violation)
      : std::runtime_error(what), last_violation_(last_violation) {}

  double last_violation() const { return last_violation_; }

 private:
  double last_violation_;
};

}  // namespace pathflow
