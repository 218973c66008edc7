#pragma once

#include <stdexcept>
#include <string>

namespace zedbs {

/// Invalid parameters or an invariant violated by a configuration value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of a function (e.g. a
/// probability not in (0, 1)).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A correlator window lacks observations in one of its chip partitions,
/// so the normalization (and the noise variance) is undefined.
class WindowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed tabular input; carries the 1-based line number.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// File system failures (cannot open, cannot write).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace zedbs
