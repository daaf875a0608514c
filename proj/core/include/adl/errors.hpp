#pragma once

#include <stdexcept>
#include <string>

namespace adl {

/// Invalid settings or inputs on disk (missing directories, empty corpora).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value falls outside the domain of a closed-form expression.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Reference scores collapsed to a single value, so sigma_S is zero.
class DegeneratePriorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric is not defined for the given labels (e.g. a single class).
class UndefinedMetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss. what() carries the diagnostic dump.
class TrainingDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace adl
