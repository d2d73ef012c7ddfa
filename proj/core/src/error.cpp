#include "crashcast/error.hpp"

namespace crashcast {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidCoordinate: return "InvalidCoordinate";
    case ErrorCode::kOutOfRangeSeverity: return "OutOfRangeSeverity";
    case ErrorCode::kMissingHeader: return "MissingHeader";
    case ErrorCode::kUnreadableFile: return "UnreadableFile";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kAllMissingFeature: return "AllMissingFeature";
    case ErrorCode::kNoObservedValues: return "NoObservedValues";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kComponentOutOfRange: return "ComponentOutOfRange";
    case ErrorCode::kDegenerateDesign: return "DegenerateDesign";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kEmptyHistory: return "EmptyHistory";
    case ErrorCode::kTargetExceedsCount: return "TargetExceedsCount";
    case ErrorCode::kTooFewSamplesForK: return "TooFewSamplesForK";
    case ErrorCode::kSingleClassInput: return "SingleClassInput";
    case ErrorCode::kUnfittedModel: return "UnfittedModel";
    case ErrorCode::kTooManyFeatures: return "TooManyFeatures";
    case ErrorCode::kEvaluationFailure: return "EvaluationFailure";
    case ErrorCode::kEmptyMatrix: return "EmptyMatrix";
    case ErrorCode::kWeatherSourceUnavailable: return "WeatherSourceUnavailable";
    case ErrorCode::kStorageFull: return "StorageFull";
    case ErrorCode::kCorruptLog: return "CorruptLog";
    case ErrorCode::kServiceUnreachable: return "ServiceUnreachable";
    case ErrorCode::kMalformedDocument: return "MalformedDocument";
  }
  return "Unknown";
}

}  // namespace crashcast
