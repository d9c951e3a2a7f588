#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace frontier {

// Invalid argument or evaluation outside an operation's domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The window has fewer points than polynomial coefficients; the caller
// is expected to lower the degree.
class DegreeTooHigh : public std::runtime_error {
 public:
  DegreeTooHigh(std::size_t points, int degree)
      : std::runtime_error("window has " + std::to_string(points) +
                           " points, degree " + std::to_string(degree) +
                           " needs at least " + std::to_string(degree + 1)),
        points_(points),
        degree_(degree) {}

  std::size_t points() const noexcept { return points_; }
  int degree() const noexcept { return degree_; }

 private:
  std::size_t points_;
  int degree_;
};

// The LP is dual infeasible (primal unbounded) or the basis became singular.
class NumericalDegeneracy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Estimation cannot proceed, e.g. an empty window.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested combination of options is not available.
class UnsupportedMode : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what
                                    : what),
        line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace frontier
