#pragma once

#include <stdexcept>
#include <string>

namespace cwdd {

// Base class for every error raised by the simulator. The CLI maps
// ConfigError to exit code 2 and everything else to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a documented invariant (negative rates, empty grids, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Dressed-state labels cannot be assigned because eigenvalues coincide.
class LabelingError : public Error {
 public:
  using Error::Error;
};

// Integrator step too coarse for the RF carrier.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

// Bracketed root search saw no sign change.
class BracketError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace cwdd
