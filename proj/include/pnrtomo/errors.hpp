#pragma once

#include <stdexcept>
#include <string>

namespace pnrtomo {

/// Coarse error classes. The numeric values are the ones surfaced through the
/// C API and, for schema/numerical/lineage, through the CLI exit code.
enum class ErrorKind {
  InvalidArgument = 1,
  Schema = 2,
  Numerical = 3,
  Lineage = 4,
  Io = 5,
  Domain = 6,
  Shape = 7,
  Calibration = 8,
  Estimation = 9,
  Config = 10,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error(ErrorKind::Domain, w) {}
};
struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorKind::Shape, w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};
struct CalibrationError : Error {
  explicit CalibrationError(const std::string& w) : Error(ErrorKind::Calibration, w) {}
};
struct EstimationError : Error {
  explicit EstimationError(const std::string& w) : Error(ErrorKind::Estimation, w) {}
};
struct NumericalError : Error {
  explicit NumericalError(const std::string& w) : Error(ErrorKind::Numerical, w) {}
};
struct SchemaError : Error {
  explicit SchemaError(const std::string& w) : Error(ErrorKind::Schema, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};
struct LineageError : Error {
  explicit LineageError(const std::string& w) : Error(ErrorKind::Lineage, w) {}
};

/// Peak fit did not converge; carries the residual of the last iterate.
class FitError : public Error {
 public:
  FitError(const std::string& w, double last_residual)
      : Error(ErrorKind::Numerical, w), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

}  // namespace pnrtomo
