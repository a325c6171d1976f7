#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dpe {

/// Failure classes surfaced by the library. The CLI prints the code name
/// verbatim, so the names are part of the tool's output contract.
enum class ErrorCode {
  kInvalidArgument,
  kEmptyInput,
  kDegenerate,
  kNoGroundTruth,
  kShapeMismatch,
  kGraph,
  kIo,
  kPlyHeader,
  kPlyBody,
  kPlyFormat,
  kModelFormat,
  kConfig,
  kUnreachable,
  kDataset,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dpe
