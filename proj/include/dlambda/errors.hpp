#pragma once

#include <stdexcept>
#include <string>

namespace dlambda {

/// Invalid argument to a physics routine (non-positive rates, zero density, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A configuration that fails validation. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bad command-line usage or unknown enum keyword. Maps to CLI exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure while marching (non-finite value).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluation requested exactly at a pole or a singular decomposition.
class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace dlambda
