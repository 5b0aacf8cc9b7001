#include "dualreward/error.hpp"

namespace dualreward {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kMalformedRecord: return "MalformedRecord";
    case ErrorCode::kNoBlank: return "NoBlank";
    case ErrorCode::kMultipleBlanks: return "MultipleBlanks";
    case ErrorCode::kAnswerInGold: return "AnswerInGold";
    case ErrorCode::kUnknownToken: return "UnknownToken";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kGenerationExhausted: return "GenerationExhausted";
    case ErrorCode::kInsufficientCandidates: return "InsufficientCandidates";
    case ErrorCode::kEmptyGold: return "EmptyGold";
    case ErrorCode::kEmptyPredictions: return "EmptyPredictions";
    case ErrorCode::kDuplicatePredictions: return "DuplicatePredictions";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kNonFiniteParameters: return "NonFiniteParameters";
    case ErrorCode::kNonPositiveScale: return "NonPositiveScale";
    case ErrorCode::kConfidenceOutOfRange: return "ConfidenceOutOfRange";
  }
  return "Unknown";
}

ErrorClass classify(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoError:
    case ErrorCode::kInvalidConfig:
      return ErrorClass::kUsage;
    case ErrorCode::kNonFiniteLoss:
    case ErrorCode::kNonFiniteParameters:
      return ErrorClass::kNumerical;
    default:
      return ErrorClass::kData;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

}  // namespace dualreward
