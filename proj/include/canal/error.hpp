#pragma once

#include <stdexcept>
#include <string>

namespace canal {

/// Input outside the physical domain of a function (negative depth, empty section, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical procedure failed: transcritical flow, singular boundary problem,
/// infeasible tuning, simulator blow-up. The message carries the location.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace canal
