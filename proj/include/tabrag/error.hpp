#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tabrag {

// Every failure the library reports carries one of these codes. The numeric
// values double as CLI exit codes, so never renumber existing entries.
enum class ErrorCode : int {
  kInvalidArgument = 2,
  kSchemaViolation = 3,
  kOverlappingSpans = 4,
  kMissingDemonstration = 5,
  kBackendUnavailable = 10,
  kBackendRefusal = 11,
  kDimensionMismatch = 12,
  kBackendNotConfigured = 13,
  kIoFailure = 20,
  kCorruptRecord = 21,
  kMissingUpstreamArtifact = 22,
  kOutputLocked = 23,
  kDuplicateId = 30,
  kUnknownChunkId = 31,
  kEmptyIndex = 32,
  kMissingAnswer = 40,
  kMalformedReply = 50,
  kOutOfRange = 51,
  kMissingLabel = 52,
  kIncompleteSheet = 53,
  kTooFewStrategies = 54,
  kLengthMismatch = 55,
  kWrongEvaluatorCount = 56,
  kEmptyInput = 57,
  kCorpusAssemblyFailed = 60,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tabrag
