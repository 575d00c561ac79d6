#include "fvs/error.hpp"

namespace fvs {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedFile: return "MalformedFile";
    case ErrorCode::kUnsupportedCameraModel: return "UnsupportedCameraModel";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kNonTriangulated: return "NonTriangulated";
    case ErrorCode::kMissingReference: return "MissingReference";
    case ErrorCode::kShapeError: return "ShapeError";
    case ErrorCode::kInvalidDepth: return "InvalidDepth";
    case ErrorCode::kEmptyOverlap: return "EmptyOverlap";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kContractViolation: return "ContractViolation";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kUsageError: return "UsageError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code) {}

Error::Error(ErrorCode code, const std::string& message,
             std::uint64_t byte_offset)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message +
                         " (at byte " + std::to_string(byte_offset) + ")"),
      code_(code),
      has_offset_(true),
      byte_offset_(byte_offset) {}

void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace fvs
