#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mtlfilm {

enum class ErrorCode {
  kContractViolation,
  kMalformedResponse,
  kExtractorUnavailable,
  kDegenerateColumn,
  kRankDeficient,
  kMissingBudget,
  kShapeMismatch,
  kNonFiniteLoss,
  kEmptyDataset,
  kVersionMismatch,
  kCorruptCheckpoint,
  kInsufficientClassMembers,
  kSchemaMismatch,
  kCorruptState,
  kIo,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kContractViolation: return "ContractViolation";
    case ErrorCode::kMalformedResponse: return "MalformedResponse";
    case ErrorCode::kExtractorUnavailable: return "ExtractorUnavailable";
    case ErrorCode::kDegenerateColumn: return "DegenerateColumn";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kMissingBudget: return "MissingBudget";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kCorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::kInsufficientClassMembers: return "InsufficientClassMembers";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kCorruptState: return "CorruptState";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, const std::string& what,
                    ErrorCode code = ErrorCode::kContractViolation) {
  if (!condition) throw Error(code, what);
}

}  // namespace mtlfilm
