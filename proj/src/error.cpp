#include "keyrate/error.hpp"

namespace keyrate {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::AsymmetricInput: return "AsymmetricInput";
    case ErrorCode::NotSquare: return "NotSquare";
    case ErrorCode::NearSingular: return "NearSingular";
    case ErrorCode::NonPositiveAlpha: return "NonPositiveAlpha";
    case ErrorCode::InvalidConditionalCov: return "InvalidConditionalCov";
    case ErrorCode::InvalidEnhancedNoise: return "InvalidEnhancedNoise";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::NonPsdInput: return "NonPsdInput";
    case ErrorCode::NotPsd: return "NotPsd";
    case ErrorCode::DegenerateConditional: return "DegenerateConditional";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::MaxIterationsExceeded: return "MaxIterationsExceeded";
    case ErrorCode::NoValidMultiplier: return "NoValidMultiplier";
    case ErrorCode::NotDegraded: return "NotDegraded";
    case ErrorCode::MuZero: return "MuZero";
    case ErrorCode::SingularEmpiricalCov: return "SingularEmpiricalCov";
    case ErrorCode::SolverFailure: return "SolverFailure";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::Infeasible:
    case ErrorCode::MaxIterationsExceeded:
    case ErrorCode::NoValidMultiplier:
    case ErrorCode::NotDegraded:
    case ErrorCode::MuZero:
    case ErrorCode::SingularEmpiricalCov:
    case ErrorCode::SolverFailure:
      return false;
    default:
      return true;
  }
}

}  // namespace keyrate
