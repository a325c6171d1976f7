#include "deeppe/error.hpp"

namespace dpe {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kEmptyInput: return "EMPTY_INPUT";
    case ErrorCode::kDegenerate: return "DEGENERATE";
    case ErrorCode::kNoGroundTruth: return "NO_GROUND_TRUTH";
    case ErrorCode::kShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::kGraph: return "GRAPH";
    case ErrorCode::kIo: return "IO";
    case ErrorCode::kPlyHeader: return "PLY_HEADER";
    case ErrorCode::kPlyBody: return "PLY_BODY";
    case ErrorCode::kPlyFormat: return "PLY_FORMAT";
    case ErrorCode::kModelFormat: return "MODEL_FORMAT";
    case ErrorCode::kConfig: return "CONFIG";
    case ErrorCode::kUnreachable: return "UNREACHABLE";
    case ErrorCode::kDataset: return "DATASET";
  }
  return "UNKNOWN";
}

}  // namespace dpe
