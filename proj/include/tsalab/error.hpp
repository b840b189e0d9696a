#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsalab {

enum class ErrorCode {
  DimensionMismatch,
  SingularPencil,
  NotPositiveDefinite,
  ConvergenceFailure,
  UnstableFastBlock,
  UnstableSchurComplement,
  NoiseCovarianceNotPD,
  SingularA,
  CalibrationFailed,
  InvalidSchedule,
  InvalidTime,
  OutsideTheta,
  NonFiniteIterate,
  SingularUpdate,
  DiagnosticsDisabled,
  TooManyFailures,
  EmptyInput,
  InvalidArgument,
  RankDeficientFeatures,
  NoStationaryDistribution,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code so
// callers (tests, the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tsalab
