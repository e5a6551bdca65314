#pragma once

#include <stdexcept>
#include <string>

namespace stochroute {

/// Invalid argument to an operation (non-positive sigma, k = 0, bad weights, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Distributions on different time grids were combined.
class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unknown node id.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Malformed input file. `line()` is 1-based; 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Structurally inconsistent network data (dangling edge endpoints etc.).
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Value iteration hit its iteration cap before the bounds closed.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decentralized traveler has no frontier left and has not reached the target.
class TrappedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Regression needs at least three finite points.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Experiment configuration failed validation; `field()` names the culprit.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace stochroute
