#pragma once

#include <stdexcept>
#include <string>

namespace twosided {

// Argument outside the mathematical domain of a map (rate outside [0,1],
// price outside [p_min, p_max], mismatched dimensions).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Invalid or inconsistent user configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative numerical routine failed to reach its tolerance.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace twosided
