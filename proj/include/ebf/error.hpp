#pragma once

#include <stdexcept>
#include <string>

namespace ebf {

enum class ErrorKind {
  InvalidInput,  // malformed data, config or arguments
  Solver,        // factorization failure, non-convergence
  Tolerance,     // a cross-check exceeded its tolerance
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct InvalidInput : Error {
  explicit InvalidInput(const std::string& what)
      : Error(ErrorKind::InvalidInput, what) {}
};

struct SolverError : Error {
  explicit SolverError(const std::string& what)
      : Error(ErrorKind::Solver, what) {}
};

struct ToleranceError : Error {
  explicit ToleranceError(const std::string& what)
      : Error(ErrorKind::Tolerance, what) {}
};

}  // namespace ebf
