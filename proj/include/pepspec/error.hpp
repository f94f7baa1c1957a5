#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pepspec {

enum class ErrorCode {
  UnknownResidue,
  UnsupportedModification,
  MalformedToken,
  OutOfBounds,
  PositionBeyondPeptide,
  EmptyMask,
  LayoutMismatch,
  MaskMismatch,
  EmptyInput,
  ScopeViolation,
  MissingKeyColumn,
  QuotaZero,
  EmptyTraining,
  EmptyModel,
  MissingBaselineBin,
  MissingPrediction,
  SchemaError,
  IoError,
  ConfigError,
  ScopeEmpty,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::size_t line = 0)
      : std::runtime_error(message), code_(code), line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  // 1-based input line for table errors, 0 when not applicable.
  std::size_t line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::size_t line_;
};

}  // namespace pepspec
