#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crashcast {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidCoordinate,
  kOutOfRangeSeverity,
  kMissingHeader,
  kUnreadableFile,
  kEmptyInput,
  kAllMissingFeature,
  kNoObservedValues,
  kLengthMismatch,
  kComponentOutOfRange,
  kDegenerateDesign,
  kInsufficientData,
  kEmptyHistory,
  kTargetExceedsCount,
  kTooFewSamplesForK,
  kSingleClassInput,
  kUnfittedModel,
  kTooManyFeatures,
  kEvaluationFailure,
  kEmptyMatrix,
  kWeatherSourceUnavailable,
  kStorageFull,
  kCorruptLog,
  kServiceUnreachable,
  kMalformedDocument,
};

std::string_view error_code_name(ErrorCode code) noexcept;

// Every failure surfaced by the library is an Error carrying a stable code, so
// callers (tests, the HTTP layer, the CLI) can branch on the kind of failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace crashcast
