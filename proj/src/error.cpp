#include "swapsim/error.hpp"

namespace swapsim {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::InvalidState: return "invalid-state";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Reference: return "reference";
    case ErrorKind::Routing: return "routing";
    case ErrorKind::Scheduling: return "scheduling";
    case ErrorKind::Capacity: return "capacity";
    case ErrorKind::Oversize: return "oversize";
    case ErrorKind::TranslationFault: return "translation-fault";
    case ErrorKind::InvariantViolation: return "invariant-violation";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

}  // namespace swapsim
