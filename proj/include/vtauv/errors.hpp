#pragma once

#include <stdexcept>
#include <string>

namespace vtauv {

// Failure families. The CLI maps each family onto its own exit status.
enum class ErrorCode {
  kDomain = 10,
  kSingularMass = 11,
  kUnreachablePose = 12,
  kChartSingularity = 13,
  kNonFinite = 14,
  kCallbackFailure = 15,
  kDimensionMismatch = 16,
  kInvalidSpec = 17,
  kNonStabilizable = 20,
  kRiccatiBlowUp = 21,
  kNotConverged = 22,
  kConfig = 30,
  kIo = 31,
  kUnknownScenario = 32,
  kDuplicateScenario = 33,
  kMissingStage = 34,
  kDigestMismatch = 35,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kSingularMass: return "singular-mass";
    case ErrorCode::kUnreachablePose: return "unreachable-pose";
    case ErrorCode::kChartSingularity: return "chart-singularity";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kCallbackFailure: return "callback-failure";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kInvalidSpec: return "invalid-spec";
    case ErrorCode::kNonStabilizable: return "non-stabilizable";
    case ErrorCode::kRiccatiBlowUp: return "riccati-blow-up";
    case ErrorCode::kNotConverged: return "not-converged";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kUnknownScenario: return "unknown-scenario";
    case ErrorCode::kDuplicateScenario: return "duplicate-scenario";
    case ErrorCode::kMissingStage: return "missing-stage";
    case ErrorCode::kDigestMismatch: return "digest-mismatch";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vtauv
