#pragma once

#include <stdexcept>
#include <string>

namespace perifem {

struct UnsupportedSpace : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidMatrix : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct StateInvalid : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolveReport {
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
};

struct SolverFailure : std::runtime_error {
  SolveReport report;
  SolverFailure(const std::string& what, SolveReport rep)
      : std::runtime_error(what), report(rep) {}
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace perifem
