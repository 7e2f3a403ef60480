#include "magstep/errors.hpp"

namespace magstep {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::GridTooNarrow: return "GridTooNarrow";
    case ErrorCode::NonPositiveGroundState: return "NonPositiveGroundState";
    case ErrorCode::BracketingFailed: return "BracketingFailed";
    case ErrorCode::NonConvexAtMinimum: return "NonConvexAtMinimum";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::UnsupportedMoment: return "UnsupportedMoment";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::DegenerateCurvature: return "DegenerateCurvature";
    case ErrorCode::SelfIntersection: return "SelfIntersection";
    case ErrorCode::WellValidationFailed: return "WellValidationFailed";
    case ErrorCode::NegativePotential: return "NegativePotential";
    case ErrorCode::DegenerateConstants: return "DegenerateConstants";
    case ErrorCode::QuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorCode::SymmetryViolation: return "SymmetryViolation";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::GapBelowNoiseFloor: return "GapBelowNoiseFloor";
    case ErrorCode::SingularStartFailure: return "SingularStartFailure";
    case ErrorCode::OrderNotAvailable: return "OrderNotAvailable";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::WeightNotPositive: return "WeightNotPositive";
    case ErrorCode::GridGuardFailure: return "GridGuardFailure";
    case ErrorCode::ExtensionNotUnimodal: return "ExtensionNotUnimodal";
    case ErrorCode::FitIllConditioned: return "FitIllConditioned";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::DegenerateCurvature:
    case ErrorCode::SelfIntersection:
    case ErrorCode::WellValidationFailed:
    case ErrorCode::DegenerateConstants:
    case ErrorCode::SymmetryViolation:
    case ErrorCode::ExtensionNotUnimodal:
    case ErrorCode::OrderNotAvailable:
    case ErrorCode::UnsupportedMoment:
    case ErrorCode::GridMismatch:
      return true;
    default:
      return false;
  }
}

}  // namespace magstep
