#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace corerl {

enum class ErrorCode {
  NotHurwitz = 1,
  SingularSystem,
  NoStabilizingSolution,
  NotStabilizable,
  InfeasibleBracket,
  SynthesisFailed,
  NonFiniteState,
  GapNonPositive,
  DimensionMismatch,
  NonFiniteLoss,
  EmptyBuffer,
  DegenerateSigmaM,
  MisalignedRuns,
  ConfigError,
  MissingMonitorData,
  IoError,
};

/// Stable identifier used in CLI output and exit-code mapping.
std::string_view error_name(ErrorCode code);

/// Process exit code for a given error (always nonzero, distinct per code).
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace corerl
