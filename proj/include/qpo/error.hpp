#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qpo {

/// Failure categories raised by the library. Each maps to a named error
/// condition in the module contracts.
enum class ErrorCode {
  MissingFile,
  MalformedRow,
  NonPositivePrice,
  TooFewRows,
  TooFewReturnRows,
  DimensionMismatch,
  LengthMismatch,
  TooManyVariables,
  InvalidSpec,
  MissingParameter,
  IndexOutOfRange,
  ParamCountMismatch,
  InvalidSize,
  EmptySample,
  AlphaOutOfRange,
  InvalidSegments,
  UnsupportedInExactMode,
  OptimizerFinished,
  BatchMismatch,
  InvalidConfig,
  IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& what);

}  // namespace qpo
