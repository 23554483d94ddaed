#ifndef COVTRIAGE_ERROR_HPP
#define COVTRIAGE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace covtriage {

/// Base class for all pipeline errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input (file syntax, bad field, unparseable value).
struct ParseError : Error {
  explicit ParseError(const std::string& msg) : Error(msg) {}
  ParseError(const std::string& msg, std::size_t line)
      : Error(msg + " (line " + std::to_string(line) + ")"), line_no(line) {}
  std::size_t line_no = 0;
};

/// A constructed object violates one of its invariants.
struct ValidationError : Error {
  explicit ValidationError(const std::string& invariant) : Error(invariant) {}
};

/// Filesystem-level failure.
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace covtriage

#endif
