#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctxslu {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// Raised for invalid configuration combinations (attention grid, generator spec, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Parse failure that knows which line of the input caused it.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered during a forward pass or training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctxslu
