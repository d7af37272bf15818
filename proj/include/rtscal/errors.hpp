#pragma once

#include <stdexcept>
#include <string>

namespace rtscal {

/// Invalid or inconsistent user-supplied configuration or preconditions.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File or stream failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure inside a solver (NaN residuals, no usable data, ...).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input geometry does not constrain the requested estimate
/// (collinear points, coincident horizontal points, ...).
class DegenerateError : public SolverError {
 public:
  using SolverError::SolverError;
};

}  // namespace rtscal
