#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fvs {

enum class ErrorCode {
  kMalformedFile,
  kUnsupportedCameraModel,
  kDuplicateId,
  kNonTriangulated,
  kMissingReference,
  kShapeError,
  kInvalidDepth,
  kEmptyOverlap,
  kEmptyInput,
  kContractViolation,
  kNonFiniteGradient,
  kIoError,
  kUsageError,
};

std::string_view ErrorCodeName(ErrorCode code);

// Every recoverable failure in the library is reported as an Error carrying a
// machine-checkable code. Parsers additionally record the byte offset at which
// decoding failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  Error(ErrorCode code, const std::string& message, std::uint64_t byte_offset);

  ErrorCode code() const noexcept { return code_; }
  bool has_offset() const noexcept { return has_offset_; }
  std::uint64_t byte_offset() const noexcept { return byte_offset_; }

 private:
  ErrorCode code_;
  bool has_offset_ = false;
  std::uint64_t byte_offset_ = 0;
};

[[noreturn]] void Fail(ErrorCode code, const std::string& message);

}  // namespace fvs
