#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dissect {

enum class ErrorKind {
  InvalidArgument,
  DegenerateElement,
  NonSeparable,
  Inconsistency,
  AssemblyScope,
  SingularSystem,
  IncompleteSolution,
  ProtocolViolation,
  SchedulerStall,
  InvalidTrace,
  Format,
};

std::string_view to_string(ErrorKind kind);

// Every module reports failures through this one exception type; the kind
// lets callers (and tests) tell the contract violations apart.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::DegenerateElement: return "degenerate-element";
    case ErrorKind::NonSeparable: return "non-separable";
    case ErrorKind::Inconsistency: return "inconsistency";
    case ErrorKind::AssemblyScope: return "assembly-scope";
    case ErrorKind::SingularSystem: return "singular-system";
    case ErrorKind::IncompleteSolution: return "incomplete-solution";
    case ErrorKind::ProtocolViolation: return "protocol-violation";
    case ErrorKind::SchedulerStall: return "scheduler-stall";
    case ErrorKind::InvalidTrace: return "invalid-trace";
    case ErrorKind::Format: return "format";
  }
  return "unknown";
}

}  // namespace dissect
