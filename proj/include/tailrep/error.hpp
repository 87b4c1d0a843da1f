#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tailrep {

/// Raised when an argument lies outside the mathematical domain of an
/// operation (delta outside (0,1], zero vector, empty tail set, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised by file loaders; carries the 1-based line number of the offending
/// input line (0 when the error is not tied to a line).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace tailrep
