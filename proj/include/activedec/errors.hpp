#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace activedec {

/// Malformed input text (alist, dense matrix, weights, config). Carries the
/// 1-based line number of the offending line, or 0 when not line-specific.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Weights or reports that do not belong to the code/decoder they are used with.
class ArtifactMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sampling produced nothing usable: unreachable distance sets, empty prior
/// target sets, exhausted resampling.
class DegenerateData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN or infinite values in messages or the loss.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace activedec
