#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scenedesc {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed input text or binary. `field` names the offending header field,
// keyword or attribute; `line` is 1-based for line-oriented formats, 0 otherwise.
class ParseError : public Error {
public:
  ParseError(std::string field, const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + field + ": " + what : field + ": " + what),
        field_(std::move(field)),
        line_(line) {}

  const std::string& field() const noexcept { return field_; }
  std::size_t line() const noexcept { return line_; }

private:
  std::string field_;
  std::size_t line_;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

}  // namespace scenedesc
