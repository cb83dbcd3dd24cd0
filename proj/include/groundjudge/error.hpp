#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace groundjudge {

enum class ErrorKind {
  kIo,
  kSchema,
  kStructure,
  kConfig,
  kTemplate,
  kMissingGroundTruth,
  kTransient,
  kAuth,
  kRequest,
  kCacheMiss,
  kMissingFixture,
  kLengthMismatch,
  kEmptyInput,
  kNoOverlap,
  kEmptyOutcomes,
  kMissingMetric,
  kMissingRawResponses,
  kTargetExceedsPool,
  kMixedSuites,
};

std::string_view ErrorKindName(ErrorKind kind);

// Single exception type for the harness; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + message),
        kind_(kind),
        message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

}  // namespace groundjudge
