#pragma once

#include <stdexcept>
#include <string>

namespace flexctl {

/// Invalid user input: configuration values, mesh tags, bounds.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A linear solve failed or an iteration did not converge.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arguments that do not fit together (space mismatch, grid mismatch, bad index).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace flexctl
