#pragma once

#include <stdexcept>
#include <string>

namespace csilab {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or parameter combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed interchange data. `field()` names the offending field.
class ParseError : public Error {
 public:
  ParseError(std::string field, const std::string& what)
      : Error("field '" + field + "': " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A value violates a documented invariant (non-finite CSI, mismatched lengths...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Input is numerically degenerate for the requested operation (zero denominator, zero norm...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace csilab
