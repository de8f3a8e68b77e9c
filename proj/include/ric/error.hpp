#pragma once

#include <stdexcept>
#include <string>

namespace ric {

enum class ErrorKind {
  UnterminatedStatement,
  MalformedInterface,
  BadConstraintChar,
  SchemaViolation,
  UnknownLetter,
  ModeMissing,
  ClobberOverlap,
  Unsatisfiable,
  UnknownMnemonic,
  BadTokenRef,
  MissingToken,
  StepLimit,
  OutOfSandbox,
  SpanStale,
  Usage,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ric
