#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace iqscore {

// Stable error taxonomy. The numeric values are mirrored by the C API status
// codes in iqscore.h, so do not renumber.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kIo = 10,
  kFormat = 11,
  kNonFiniteValue = 12,
  kLabelCountMismatch = 13,
  kSchema = 14,
  kZeroNormRow = 20,
  kNotNormalized = 21,
  kEmptyPool = 22,
  kLengthMismatch = 23,
  kEmptyVector = 24,
  kAllZeroSpectrum = 25,
  kDegenerateCap = 26,
  kConvergenceFailure = 27,
  kZeroVariance = 28,
  kWeightError = 29,
  kNoEligibleIdentity = 30,
  kSingleIdentity = 31,
};

std::string_view error_name(ErrorCode code) noexcept;

// 2 for input/format problems, 3 for computation/validation problems.
int exit_code_for(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace iqscore
