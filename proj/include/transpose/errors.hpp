#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace transpose {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or matrix extents.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// A count argument (k, n, batch size, ...) violates its precondition.
class CountError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked in the wrong state (no tape, missing gradients, ...).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Degenerate geometric input: empty cloud, zero-norm quaternion, ...
class GeometryError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset, checkpoint or generation failure.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace transpose
