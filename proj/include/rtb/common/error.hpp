#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rtb {

// Input data could not be used: malformed logs, missing files, degenerate labels.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A malformed log line. Recoverable: callers may skip the line and continue.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line_number, const std::string& what)
      : DataError("line " + std::to_string(line_number) + ": " + what), line_(line_number) {}

  std::size_t line_number() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Non-finite loss, bid or parameter encountered during replay or training.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value or command-line usage. `field` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace rtb
