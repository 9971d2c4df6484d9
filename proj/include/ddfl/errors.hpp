#pragma once

#include <stdexcept>
#include <string>

namespace ddfl {

// Domain-level failures (bad shapes, infeasible problems, probe failures, ...).
// The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class StructureError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& msg, double ls_residual = 0.0)
      : Error(msg), least_squares_residual(ls_residual) {}
  double least_squares_residual;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ProbeError : public Error {
 public:
  using Error::Error;
};

class CollectionError : public Error {
 public:
  explicit CollectionError(const std::string& msg, int step = -1)
      : Error(msg), first_offending_step(step) {}
  int first_offending_step;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class LinearDependenceError : public Error {
 public:
  explicit LinearDependenceError(const std::string& msg, int basis_index = -1)
      : Error(msg), offending_basis_index(basis_index) {}
  int offending_basis_index;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Configuration / file-system failures. The CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ddfl
