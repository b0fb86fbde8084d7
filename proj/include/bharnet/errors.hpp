#pragma once

#include <stdexcept>
#include <string>

namespace bharnet {

/// Malformed caller data: bad shapes, out-of-range indices, unreadable records.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Inconsistent configuration: unknown keys, variant/branch mismatch, bad hyperparameters.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Violated API contract, e.g. calling backward on a non-scalar.
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

/// Numerical failure during optimisation (non-finite loss or gradient).
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bharnet
