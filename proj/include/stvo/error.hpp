#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stvo {

enum class ErrorCode {
  kAngleNearPi,
  kBehindCamera,
  kShapeMismatch,
  kNonFinite,
  kTapeConsumed,
  kUnknownWeight,
  kBadDimensions,
  kEmptyTargetSet,
  kInvalidDepth,
  kMissingDepthFile,
  kDegenerateBADepth,
  kMemoryBudget,
  kSingularSystem,
  kNoAssociations,
  kDegenerateConfiguration,
  kMalformedIndex,
  kMissingImage,
  kMalformedFile,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

// All domain failures surface as this exception; the CLI maps it to exit 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stvo
