#include "pepspec/error.hpp"

namespace pepspec {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownResidue: return "UnknownResidue";
    case ErrorCode::UnsupportedModification: return "UnsupportedModification";
    case ErrorCode::MalformedToken: return "MalformedToken";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::PositionBeyondPeptide: return "PositionBeyondPeptide";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::MaskMismatch: return "MaskMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ScopeViolation: return "ScopeViolation";
    case ErrorCode::MissingKeyColumn: return "MissingKeyColumn";
    case ErrorCode::QuotaZero: return "QuotaZero";
    case ErrorCode::EmptyTraining: return "EmptyTraining";
    case ErrorCode::EmptyModel: return "EmptyModel";
    case ErrorCode::MissingBaselineBin: return "MissingBaselineBin";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ScopeEmpty: return "ScopeEmpty";
  }
  return "Unknown";
}

}  // namespace pepspec
