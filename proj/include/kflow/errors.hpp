#pragma once

#include <stdexcept>
#include <string>

namespace kflow {

/// Base error. Carries the module and monitor that raised it so reports can
/// name the failing check.
class Error : public std::runtime_error {
 public:
  Error(std::string module, std::string monitor, const std::string& what)
      : std::runtime_error(module + "/" + monitor + ": " + what),
        module_(std::move(module)),
        monitor_(std::move(monitor)) {}

  const std::string& module() const noexcept { return module_; }
  const std::string& monitor() const noexcept { return monitor_; }

 private:
  std::string module_;
  std::string monitor_;
};

// Invalid inputs or configuration (CLI exit status 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Density dipped below the admissible floor.
class PositivityError : public Error {
 public:
  using Error::Error;
};

// Declared parity does not match the field values.
class RegularityError : public Error {
 public:
  using Error::Error;
};

// Solver or discretization breakdown.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Adaptive stepping could not meet its tolerance above dt_min.
class SteppingError : public Error {
 public:
  using Error::Error;
};

}  // namespace kflow
