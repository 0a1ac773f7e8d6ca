#ifndef CLOUDDICT_ERRORS_HPP
#define CLOUDDICT_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clouddict {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input. `line()` is 1-based; 0 means "no particular line".
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A sample location outside the basis domain [-1,1]^2.
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Too few or collinear points for a PCA frame.
class DegeneratePatch : public Error {
 public:
  using Error::Error;
};

class ZeroAtom : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace clouddict

#endif  // CLOUDDICT_ERRORS_HPP
