#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace patchcheck {

enum class ErrorCode {
  MalformedHeader,
  EmptyInput,
  UnsupportedAtom,
  EmptyModifiedSet,
  DimensionMismatch,
  ZeroNormVector,
  SingleClassData,
  NonFiniteLoss,
  UndefinedMetric,
  MissingCodeFile,
  TooFewRecords,
  NoCorrectPatches,
  MissingInputs,
  ModelRequired,
  EmptyManifest,
  InvalidFormat,
  InvalidArgument,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::UnsupportedAtom: return "UnsupportedAtom";
    case ErrorCode::EmptyModifiedSet: return "EmptyModifiedSet";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroNormVector: return "ZeroNormVector";
    case ErrorCode::SingleClassData: return "SingleClassData";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::UndefinedMetric: return "UndefinedMetric";
    case ErrorCode::MissingCodeFile: return "MissingCodeFile";
    case ErrorCode::TooFewRecords: return "TooFewRecords";
    case ErrorCode::NoCorrectPatches: return "NoCorrectPatches";
    case ErrorCode::MissingInputs: return "MissingInputs";
    case ErrorCode::ModelRequired: return "ModelRequired";
    case ErrorCode::EmptyManifest: return "EmptyManifest";
    case ErrorCode::InvalidFormat: return "InvalidFormat";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

// Every failure surfaced by the library carries one of the codes above so
// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace patchcheck
