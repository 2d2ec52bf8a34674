#include "corerl/error.hpp"

namespace corerl {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotHurwitz: return "NotHurwitz";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NoStabilizingSolution: return "NoStabilizingSolution";
    case ErrorCode::NotStabilizable: return "NotStabilizable";
    case ErrorCode::InfeasibleBracket: return "InfeasibleBracket";
    case ErrorCode::SynthesisFailed: return "SynthesisFailed";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::GapNonPositive: return "GapNonPositive";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyBuffer: return "EmptyBuffer";
    case ErrorCode::DegenerateSigmaM: return "DegenerateSigmaM";
    case ErrorCode::MisalignedRuns: return "MisalignedRuns";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MissingMonitorData: return "MissingMonitorData";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

int exit_code(ErrorCode code) { return 10 + static_cast<int>(code); }

}  // namespace corerl
