#include "errors.hpp"

namespace xastnn {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSyntax: return "SyntaxError";
    case ErrorCode::kSchema: return "SchemaError";
    case ErrorCode::kUnknownProfile: return "UnknownProfile";
    case ErrorCode::kEmptyIdentifierSet: return "EmptyIdentifierSet";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kBadSegmentId: return "BadSegmentId";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kNotScalar: return "NotScalar";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptySequence: return "EmptySequence";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kDataFormat: return "DataFormatError";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kCheckpoint: return "CheckpointError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInternal: return "InternalError";
  }
  return "UnknownError";
}

SyntaxError::SyntaxError(int line, int column, std::string token,
                         const std::string& what)
    : Error(ErrorCode::kSyntax,
            std::to_string(line) + ":" + std::to_string(column) + ": " + what +
                " near '" + token + "'"),
      line_(line),
      column_(column),
      token_(std::move(token)) {}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, std::string(error_code_name(code)) + ": " + message);
}

}  // namespace xastnn
