#pragma once

#include <stdexcept>
#include <string>

namespace aerobeam {

// Base for every error raised by the library. The CLI maps subclasses onto
// process exit codes (config 2, divergence 3, I/O 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Receiver coincides with an array element, or a similar degenerate layout.
class GeometryError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Non-finite loss, gradient or intermediate during learning.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace aerobeam
