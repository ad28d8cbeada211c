#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace didpanel {

/// Bad or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A row-level problem in a delimited input file.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A computation needs dates the loaded series do not cover.
class CoverageError : public DataError {
 public:
  using DataError::DataError;
};

/// The requested model cannot be fit or is not identified.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid run or simulation configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace didpanel
