#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace modeshift {

enum class ErrorCode {
  kFeedIncomplete,
  kReferentialIntegrity,
  kUnsupportedFeature,
  kUnknownRoute,
  kNotServed,
  kFormat,
  kDomain,
  kNoPath,
  kDegenerateDemand,
  kUnknownProfile,
  kInfeasibleBaseline,
  kOverCapacity,
  kDemandExhausted,
  kConfiguration,
  kEmptySeries,
  kIncompatibleSeries,
  kIo,
};

constexpr std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::kFeedIncomplete: return "feed-incomplete";
    case ErrorCode::kReferentialIntegrity: return "referential-integrity";
    case ErrorCode::kUnsupportedFeature: return "unsupported-feature";
    case ErrorCode::kUnknownRoute: return "unknown-route";
    case ErrorCode::kNotServed: return "not-served";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kNoPath: return "no-path";
    case ErrorCode::kDegenerateDemand: return "degenerate-demand";
    case ErrorCode::kUnknownProfile: return "unknown-profile";
    case ErrorCode::kInfeasibleBaseline: return "infeasible-baseline";
    case ErrorCode::kOverCapacity: return "over-capacity";
    case ErrorCode::kDemandExhausted: return "demand-exhausted";
    case ErrorCode::kConfiguration: return "configuration";
    case ErrorCode::kEmptySeries: return "empty-series";
    case ErrorCode::kIncompatibleSeries: return "incompatible-series";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

// Every failure in the library is reported through this type; `code()` is
// what callers and tests branch on, `what()` carries the offending detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string const& detail)
      : std::runtime_error(std::string{to_string(code)} + ": " + detail),
        code_{code} {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, std::string const& detail) {
  throw Error{code, detail};
}

}  // namespace modeshift
