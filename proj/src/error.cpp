#include "iqscore/error.hpp"

namespace iqscore {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kFormat: return "FormatError";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kLabelCountMismatch: return "LabelCountMismatch";
    case ErrorCode::kSchema: return "SchemaError";
    case ErrorCode::kZeroNormRow: return "ZeroNormRow";
    case ErrorCode::kNotNormalized: return "NotNormalized";
    case ErrorCode::kEmptyPool: return "EmptyPool";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyVector: return "EmptyVector";
    case ErrorCode::kAllZeroSpectrum: return "AllZeroSpectrum";
    case ErrorCode::kDegenerateCap: return "DegenerateCap";
    case ErrorCode::kConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::kZeroVariance: return "ZeroVariance";
    case ErrorCode::kWeightError: return "WeightError";
    case ErrorCode::kNoEligibleIdentity: return "NoEligibleIdentity";
    case ErrorCode::kSingleIdentity: return "SingleIdentity";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kIo:
    case ErrorCode::kFormat:
    case ErrorCode::kNonFiniteValue:
    case ErrorCode::kLabelCountMismatch:
    case ErrorCode::kSchema:
      return 2;
    default:
      return 3;
  }
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace iqscore
