#include "qpo/error.hpp"

namespace qpo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonPositivePrice: return "NonPositivePrice";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::TooFewReturnRows: return "TooFewReturnRows";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooManyVariables: return "TooManyVariables";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::MissingParameter: return "MissingParameter";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ParamCountMismatch: return "ParamCountMismatch";
    case ErrorCode::InvalidSize: return "InvalidSize";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::InvalidSegments: return "InvalidSegments";
    case ErrorCode::UnsupportedInExactMode: return "UnsupportedInExactMode";
    case ErrorCode::OptimizerFinished: return "OptimizerFinished";
    case ErrorCode::BatchMismatch: return "BatchMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

void raise(ErrorCode code, const std::string& what) {
  throw Error(code, std::string(to_string(code)) + ": " + what);
}

}  // namespace qpo
