#pragma once
// Shared scalar types, error taxonomy and small helpers.

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace kds {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

enum class ErrorCode {
  NoHorizons,
  PolarSingularity,
  InfeasibleC,
  DomainExit,
  StepFailure,
  NoRoot,
  MultipleRoots,
  DegenerateLinearization,
  BranchCut,
  UnsupportedModel,
  SolverFailure,
  StiffFailure,
  NearPole,
  ContourDivergence,
  PoleOnContour,
  DegenerateFit,
  InvalidArgument,
  ConfigError
};

constexpr const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::NoHorizons: return "NoHorizons";
    case ErrorCode::PolarSingularity: return "PolarSingularity";
    case ErrorCode::InfeasibleC: return "InfeasibleC";
    case ErrorCode::DomainExit: return "DomainExit";
    case ErrorCode::StepFailure: return "StepFailure";
    case ErrorCode::NoRoot: return "NoRoot";
    case ErrorCode::MultipleRoots: return "MultipleRoots";
    case ErrorCode::DegenerateLinearization: return "DegenerateLinearization";
    case ErrorCode::BranchCut: return "BranchCut";
    case ErrorCode::UnsupportedModel: return "UnsupportedModel";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::StiffFailure: return "StiffFailure";
    case ErrorCode::NearPole: return "NearPole";
    case ErrorCode::ContourDivergence: return "ContourDivergence";
    case ErrorCode::PoleOnContour: return "PoleOnContour";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode c, const std::string& msg) { throw Error(c, msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) raise(ErrorCode::InvalidArgument, msg);
}

inline constexpr double sqr(double x) { return x * x; }

}  // namespace kds
