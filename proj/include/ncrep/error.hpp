#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ncrep {

enum class ErrorCode {
  NotHermitian,
  NotPositiveDefinite,
  DimensionMismatch,
  EmptyInput,
  NotFaithful,
  DoesNotCommute,
  InconsistencyDetected,
  NotDCentral,
  GramSingular,
  DensityDoesNotCommute,
  NotNormalized,
  NotCentral,
  NotAnExtension,
  SupportNotCentral,
  BadPartition,
  GSingular,
  ProjectionsNotPartition,
  NotCentralInD,
  NotAbelian,
  NotDense,
  NotInvertible,
  NotTracial,
  NotTriangularType,
  NotBoundedBelow,
  ParseError,
  InvariantViolation,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NotFaithful: return "NotFaithful";
    case ErrorCode::DoesNotCommute: return "DoesNotCommute";
    case ErrorCode::InconsistencyDetected: return "InconsistencyDetected";
    case ErrorCode::NotDCentral: return "NotDCentral";
    case ErrorCode::GramSingular: return "GramSingular";
    case ErrorCode::DensityDoesNotCommute: return "DensityDoesNotCommute";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::NotCentral: return "NotCentral";
    case ErrorCode::NotAnExtension: return "NotAnExtension";
    case ErrorCode::SupportNotCentral: return "SupportNotCentral";
    case ErrorCode::BadPartition: return "BadPartition";
    case ErrorCode::GSingular: return "GSingular";
    case ErrorCode::ProjectionsNotPartition: return "ProjectionsNotPartition";
    case ErrorCode::NotCentralInD: return "NotCentralInD";
    case ErrorCode::NotAbelian: return "NotAbelian";
    case ErrorCode::NotDense: return "NotDense";
    case ErrorCode::NotInvertible: return "NotInvertible";
    case ErrorCode::NotTracial: return "NotTracial";
    case ErrorCode::NotTriangularType: return "NotTriangularType";
    case ErrorCode::NotBoundedBelow: return "NotBoundedBelow";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

/// The single exception type thrown by the library. The code identifies the
/// failed precondition; the message carries the numbers behind it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace ncrep
