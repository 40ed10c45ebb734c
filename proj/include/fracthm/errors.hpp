#pragma once

#include <stdexcept>
#include <string>

namespace fracthm {

enum class ErrorKind {
  SegmentNotRepresentable,
  DegenerateGeometry,
  ParseError,
  NonConformingMesh,
  OrientationError,
  SingularLocalSystem,
  ShapeMismatch,
  NonFiniteResidual,
  DegenerateBound,
  NonConvergence,
  LinearSolveFailure,
  ValidationError,
  IoError,
};

const char* to_string(ErrorKind kind);

/// Base of every error raised by the library. The kind is what callers
/// dispatch on (the CLI maps it to an exit code).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when a time step cannot be completed even after the dt cuts.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(int step, const std::string& what)
      : Error(ErrorKind::NonConvergence, what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SegmentNotRepresentable: return "SegmentNotRepresentable";
    case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::NonConformingMesh: return "NonConformingMesh";
    case ErrorKind::OrientationError: return "OrientationError";
    case ErrorKind::SingularLocalSystem: return "SingularLocalSystem";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteResidual: return "NonFiniteResidual";
    case ErrorKind::DegenerateBound: return "DegenerateBound";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::LinearSolveFailure: return "LinearSolveFailure";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace fracthm
