#pragma once

#include <stdexcept>
#include <string>

namespace specdet {

enum class ErrorCode {
  NonSquare,
  NonFinite,
  PoleAtOne,
  ZeroValue,
  PhaseJumpUnresolved,
  IllConditioned,
  InsufficientSamples,
  Unconverged,
  SpectrumOnCut,
  NotPositiveDefinite,
  NotHermitian,
  LeadingCoefficientSingular,
  StepSizeUnderflow,
  NonInvertibleProblem,
  RankDeficient,
  GraphCoordinateUnavailable,
  BoundaryZero,
  BudgetExceeded,
  TailFitPoor,
  ParseError,
};

inline const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::PoleAtOne: return "PoleAtOne";
    case ErrorCode::ZeroValue: return "ZeroValue";
    case ErrorCode::PhaseJumpUnresolved: return "PhaseJumpUnresolved";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::Unconverged: return "Unconverged";
    case ErrorCode::SpectrumOnCut: return "SpectrumOnCut";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::LeadingCoefficientSingular: return "LeadingCoefficientSingular";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::NonInvertibleProblem: return "NonInvertibleProblem";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::GraphCoordinateUnavailable: return "GraphCoordinateUnavailable";
    case ErrorCode::BoundaryZero: return "BoundaryZero";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::TailFitPoor: return "TailFitPoor";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  const char* name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace specdet
