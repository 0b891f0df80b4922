#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cinerecon {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes, ranks or domain tags that do not fit together.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range or infeasible algorithm parameters.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition on the data does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered, or a numerical procedure broke down.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File system failures (open, read, write).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed tensor file or header. Carries the byte offset where parsing stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace cinerecon
