#pragma once

#include <stdexcept>
#include <string>

namespace qreadout {

/// Invalid argument value (bad label, non-stochastic matrix, zero detuning, ...).
class ArgumentError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Qubit or element index outside the register.
class IndexError : public std::out_of_range {
  public:
    using std::out_of_range::out_of_range;
};

/// Malformed textual input (circuit files, CSV, config). Carries a 1-based
/// line number when one is known (0 otherwise).
class ParseError : public std::runtime_error {
  public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line),
          message_(what) {}
    explicit ParseError(const std::string& what) : ParseError(0, what) {}

    std::size_t line() const { return line_; }
    /// The message without the "line N:" prefix, for re-wrapping.
    const std::string& message() const { return message_; }

  private:
    std::size_t line_ = 0;
    std::string message_;
};

/// Least-squares fit could not produce a usable result.
class FitError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Filesystem-level failure while reading or writing outputs.
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace qreadout
