#pragma once

#include <stdexcept>
#include <string>

namespace magstep {

enum class ErrorCode {
  GridTooNarrow,
  NonPositiveGroundState,
  BracketingFailed,
  NonConvexAtMinimum,
  SingularSystem,
  UnsupportedMoment,
  InvariantViolation,
  DegenerateCurvature,
  SelfIntersection,
  WellValidationFailed,
  NegativePotential,
  DegenerateConstants,
  QuadratureNotConverged,
  SymmetryViolation,
  ConvergenceFailure,
  GapBelowNoiseFloor,
  SingularStartFailure,
  OrderNotAvailable,
  GridMismatch,
  WeightNotPositive,
  GridGuardFailure,
  ExtensionNotUnimodal,
  FitIllConditioned,
  ConfigInvalid,
};

const char* error_name(ErrorCode code);

// Exit-code family: configuration and geometric preconditions are validation
// failures, everything else is numerical.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace magstep
