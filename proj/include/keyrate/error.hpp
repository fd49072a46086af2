#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace keyrate {

enum class ErrorCode {
  // input validation
  NotPositiveDefinite,
  DimensionMismatch,
  AsymmetricInput,
  NotSquare,
  NearSingular,
  NonPositiveAlpha,
  InvalidConditionalCov,
  InvalidEnhancedNoise,
  DimensionTooLarge,
  NonPsdInput,
  NotPsd,
  DegenerateConditional,
  InvalidArgument,
  ParseError,
  // numerical / solver
  Infeasible,
  MaxIterationsExceeded,
  NoValidMultiplier,
  NotDegraded,
  MuZero,
  SingularEmpiricalCov,
  SolverFailure,
};

std::string_view to_string(ErrorCode code);

/// True for errors caused by bad input rather than by a failed computation.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace keyrate
