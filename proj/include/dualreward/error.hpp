#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dualreward {

enum class ErrorCode {
  // usage / io
  kIoError,
  kInvalidConfig,
  // data validation
  kMalformedRecord,
  kNoBlank,
  kMultipleBlanks,
  kAnswerInGold,
  kUnknownToken,
  kIndexOutOfRange,
  kShapeMismatch,
  kEmptyBatch,
  kGenerationExhausted,
  kInsufficientCandidates,
  kEmptyGold,
  kEmptyPredictions,
  kDuplicatePredictions,
  kEmptyDataset,
  kNonPositiveScale,
  kConfidenceOutOfRange,
  // numerical
  kNonFiniteLoss,
  kNonFiniteParameters,
};

std::string_view to_string(ErrorCode code);

// Coarse classification used for process exit codes.
enum class ErrorClass { kUsage, kData, kNumerical };

ErrorClass classify(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dualreward
