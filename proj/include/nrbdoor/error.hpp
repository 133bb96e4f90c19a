#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nrb {

/// Base for every error raised by the library. The CLI maps
/// InvalidArgument to a usage failure and the rest to data failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

/// A mesh-only or cloud-only operation was handed the other structure.
class StructureIncompatible : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nrb
