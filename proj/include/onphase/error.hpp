#pragma once

#include <stdexcept>
#include <string>

namespace onphase {

enum class ErrorKind {
  Format,
  InvalidHeader,
  Truncation,
  Data,
  Parse,
  Range,
  Validation,
  Domain,
  InsufficientData,
  Degenerate,
  Convergence,
  Capacity,
  SignalTooWeak,
  EmptyInput,
  Io,
  Connectivity,
  Dependency,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and the CLI
// exit codes) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace onphase
