#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xastnn {

enum class ErrorCode {
  kSyntax,
  kSchema,
  kUnknownProfile,
  kEmptyIdentifierSet,
  kShapeMismatch,
  kBadSegmentId,
  kEmptyInput,
  kNotScalar,
  kDimensionMismatch,
  kEmptySequence,
  kEmptyBatch,
  kLengthMismatch,
  kEmptyCorpus,
  kDataFormat,
  kNonFiniteLoss,
  kIo,
  kCheckpoint,
  kInvalidArgument,
  kInternal,
};

const char* error_code_name(ErrorCode code);

// Base for every failure raised by the core library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(int line, int column, std::string token, const std::string& what);

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::string& token() const noexcept { return token_; }

 private:
  int line_;
  int column_;
  std::string token_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace xastnn
