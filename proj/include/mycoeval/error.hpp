#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mycoeval {

enum class ErrorKind {
  kInvalidBox,
  kInvalidDims,
  kOutOfFrame,
  kParse,
  kRange,
  kClass,
  kSchema,
  kReferential,
  kUndefinedRecall,
  kUndefinedMean,
  kGeneration,
  kUsage,
  kIo,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the toolkit; the kind says which contract broke.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by the line-format parsers; `line()` is 1-based.
class LineError : public Error {
 public:
  LineError(ErrorKind kind, std::size_t line, const std::string& message)
      : Error(kind, "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mycoeval
