#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fracquant {

enum class ErrorCode {
  kInvalidArgument,
  kConfigError,
  kInvalidSpec,
  kNonStochasticMatrix,
  kDegenerateRow,
  kSeparationViolation,
  kRatioOutOfRange,
  kInadmissibleWord,
  kThresholdTooSmall,
  kLevelCapExceeded,
  kFrequencyMismatch,
  kInsufficientLevels,
  kZeroError,
  kEmptyReport,
  kNonConvergence,
};

std::string_view to_string(ErrorCode code);

// Exit status the CLI maps each error class to.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fracquant
