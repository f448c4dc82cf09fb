#include "fracquant/error.hpp"

namespace fracquant {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kNonStochasticMatrix: return "NonStochasticMatrix";
    case ErrorCode::kDegenerateRow: return "DegenerateRow";
    case ErrorCode::kSeparationViolation: return "SeparationViolation";
    case ErrorCode::kRatioOutOfRange: return "RatioOutOfRange";
    case ErrorCode::kInadmissibleWord: return "InadmissibleWord";
    case ErrorCode::kThresholdTooSmall: return "ThresholdTooSmall";
    case ErrorCode::kLevelCapExceeded: return "LevelCapExceeded";
    case ErrorCode::kFrequencyMismatch: return "FrequencyMismatch";
    case ErrorCode::kInsufficientLevels: return "InsufficientLevels";
    case ErrorCode::kZeroError: return "ZeroError";
    case ErrorCode::kEmptyReport: return "EmptyReport";
    case ErrorCode::kNonConvergence: return "NonConvergence";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kInvalidArgument:
      return 1;
    case ErrorCode::kInvalidSpec:
    case ErrorCode::kNonStochasticMatrix:
    case ErrorCode::kDegenerateRow:
    case ErrorCode::kSeparationViolation:
    case ErrorCode::kRatioOutOfRange:
    case ErrorCode::kInadmissibleWord:
    case ErrorCode::kFrequencyMismatch:
      return 2;
    case ErrorCode::kNonConvergence:
      return 3;
    default:
      return 1;
  }
}

}  // namespace fracquant
