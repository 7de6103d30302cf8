#include "stvo/error.hpp"

namespace stvo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kAngleNearPi: return "AngleNearPi";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kTapeConsumed: return "TapeConsumed";
    case ErrorCode::kUnknownWeight: return "UnknownWeight";
    case ErrorCode::kBadDimensions: return "BadDimensions";
    case ErrorCode::kEmptyTargetSet: return "EmptyTargetSet";
    case ErrorCode::kInvalidDepth: return "InvalidDepth";
    case ErrorCode::kMissingDepthFile: return "MissingDepthFile";
    case ErrorCode::kDegenerateBADepth: return "DegenerateBADepth";
    case ErrorCode::kMemoryBudget: return "MemoryBudget";
    case ErrorCode::kSingularSystem: return "SingularSystem";
    case ErrorCode::kNoAssociations: return "NoAssociations";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kMalformedIndex: return "MalformedIndex";
    case ErrorCode::kMissingImage: return "MissingImage";
    case ErrorCode::kMalformedFile: return "MalformedFile";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace stvo
