#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semplan {

enum class ErrorCode {
  kInvalidArgument,
  kBehindCamera,
  kInvalidPlane,
  kOutOfBounds,
  kEmptyCluster,
  kDegenerateGeometry,
  kNoModel,
  kEmptyWindow,
  kSingularNormalEquations,
  kInvalidSpec,
  kNoMatches,
  kDegenerateConfiguration,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kInvalidPlane: return "InvalidPlane";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kEmptyCluster: return "EmptyCluster";
    case ErrorCode::kDegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::kNoModel: return "NoModel";
    case ErrorCode::kEmptyWindow: return "EmptyWindow";
    case ErrorCode::kSingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kNoMatches: return "NoMatches";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

}  // namespace semplan
