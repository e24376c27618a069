#pragma once

#include <stdexcept>
#include <string>

namespace mest {

/// Base for every error raised by the engine. `stage` is filled in by
/// m_estimate so callers can tell which pipeline step failed.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}

  const std::string& stage() const noexcept { return stage_; }
  void set_stage(std::string stage) { stage_ = std::move(stage); }

 private:
  std::string stage_;
};

/// Bad caller-supplied argument (negative lag, b outside (0,1), ...).
class ArgumentError : public Error {
  using Error::Error;
};

/// Missing or ill-typed column.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& column, const std::string& what)
      : Error("column '" + column + "': " + what), column_(column) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

/// Malformed CSV input. Line numbers are 1-based and count the header.
class IngestError : public Error {
 public:
  IngestError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// An estimating function broke its output-length contract.
class ContractError : public Error {
  using Error::Error;
};

/// Overlapping, gapped or mis-sized stacking layout.
class LayoutError : public Error {
  using Error::Error;
};

/// Invalid estimator configuration (e.g. non-PD working correlation).
class ConfigError : public Error {
  using Error::Error;
};

class DerivativeError : public Error {
 public:
  DerivativeError(long coordinate, const std::string& what)
      : Error("coordinate " + std::to_string(coordinate) + ": " + what),
        coordinate_(coordinate) {}
  long coordinate() const noexcept { return coordinate_; }

 private:
  long coordinate_;
};

/// Singular or numerically singular matrix where an inverse is required.
class SingularityError : public Error {
  using Error::Error;
};

class CorrectionError : public Error {
  using Error::Error;
};

}  // namespace mest
