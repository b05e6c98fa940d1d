#pragma once

#include <stdexcept>
#include <string>

namespace flatflow {

enum class ErrorKind {
  InvalidArgument,
  EmptyRegion,
  FullRegion,
  BoundaryClipped,
  NonFinite,
  DualInfeasible,
  Vanished,
  ResolutionViolation,
  TooFewVertices,
  NotStarShaped,
  CylinderOutsideDomain,
  EmptyFiber,
  ScaleBelowParabolicCutoff,
  OffLattice,
  MeasureOutOfRange,
  EmptyContactSet,
  ShapeOutOfDomain,
  ConfigError,
  IoError,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptyRegion: return "EmptyRegion";
    case ErrorKind::FullRegion: return "FullRegion";
    case ErrorKind::BoundaryClipped: return "BoundaryClipped";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::DualInfeasible: return "DualInfeasible";
    case ErrorKind::Vanished: return "Vanished";
    case ErrorKind::ResolutionViolation: return "ResolutionViolation";
    case ErrorKind::TooFewVertices: return "TooFewVertices";
    case ErrorKind::NotStarShaped: return "NotStarShaped";
    case ErrorKind::CylinderOutsideDomain: return "CylinderOutsideDomain";
    case ErrorKind::EmptyFiber: return "EmptyFiber";
    case ErrorKind::ScaleBelowParabolicCutoff: return "ScaleBelowParabolicCutoff";
    case ErrorKind::OffLattice: return "OffLattice";
    case ErrorKind::MeasureOutOfRange: return "MeasureOutOfRange";
    case ErrorKind::EmptyContactSet: return "EmptyContactSet";
    case ErrorKind::ShapeOutOfDomain: return "ShapeOutOfDomain";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace flatflow
