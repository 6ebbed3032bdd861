#include "onphase/error.hpp"

namespace onphase {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Format: return "format error";
    case ErrorKind::InvalidHeader: return "invalid header";
    case ErrorKind::Truncation: return "truncation error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Range: return "range error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::InsufficientData: return "insufficient data";
    case ErrorKind::Degenerate: return "degenerate input";
    case ErrorKind::Convergence: return "convergence error";
    case ErrorKind::Capacity: return "capacity error";
    case ErrorKind::SignalTooWeak: return "signal too weak";
    case ErrorKind::EmptyInput: return "empty input";
    case ErrorKind::Io: return "I/O error";
    case ErrorKind::Connectivity: return "connectivity error";
    case ErrorKind::Dependency: return "dependency error";
  }
  return "error";
}

}  // namespace onphase
