#include "ric/error.hpp"

namespace ric {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnterminatedStatement: return "UnterminatedStatement";
    case ErrorKind::MalformedInterface: return "MalformedInterface";
    case ErrorKind::BadConstraintChar: return "BadConstraintChar";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::UnknownLetter: return "UnknownLetter";
    case ErrorKind::ModeMissing: return "ModeMissing";
    case ErrorKind::ClobberOverlap: return "ClobberOverlap";
    case ErrorKind::Unsatisfiable: return "Unsatisfiable";
    case ErrorKind::UnknownMnemonic: return "UnknownMnemonic";
    case ErrorKind::BadTokenRef: return "BadTokenRef";
    case ErrorKind::MissingToken: return "MissingToken";
    case ErrorKind::StepLimit: return "StepLimit";
    case ErrorKind::OutOfSandbox: return "OutOfSandbox";
    case ErrorKind::SpanStale: return "SpanStale";
    case ErrorKind::Usage: return "Usage";
  }
  return "Unknown";
}

}  // namespace ric
