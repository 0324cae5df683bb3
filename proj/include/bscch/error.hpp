#pragma once

#include <stdexcept>
#include <string>

namespace bscch {

/// Bad user input: out-of-range parameters, inconsistent sizes, inadmissible configurations.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Structurally valid input that violates a mesh or data invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// A linear or nonlinear solve that did not produce a usable answer.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StepFailure : public SolverFailure {
 public:
  StepFailure(const std::string& what, double time, double residual)
      : SolverFailure(what), time_(time), residual_(residual) {}

  double time() const noexcept { return time_; }
  double residual() const noexcept { return residual_; }

 private:
  double time_;
  double residual_;
};

}  // namespace bscch
