#pragma once

#include <stdexcept>
#include <string>

namespace bicavity {

/// Solver did not produce a usable answer (eigendecomposition failure,
/// non-converged root search, ...).  Maps to CLI exit status 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid job configuration.  `pointer` is a JSON pointer to the offending
/// field.  Maps to CLI exit status 1.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string pointer, const std::string& what)
      : std::runtime_error(pointer + ": " + what), pointer_(std::move(pointer)) {}

  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

}  // namespace bicavity
