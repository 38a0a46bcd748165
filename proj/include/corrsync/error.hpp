#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace corrsync {

enum class ErrorCode {
  InvalidArgument,
  MissingFile,
  ParseError,
  MetricAsymmetry,
  InvalidMetric,
  DuplicateShapes,
  IndexOutOfRange,
  NotNormalized,
  IdMismatch,
  MissingMap,
  Disconnected,
  TooManyPaths,
  OracleBound,
  EmptyPathSet,
  EmptyRow,
  MaxStepsExceeded,
  BallOverlap,
  MissingField,
  NoMatches,
  NoSharedLabels,
  Degenerate,
  Antipodal,
};

std::string_view to_string(ErrorCode code);

// Domain error. The CLI maps every Error to exit status 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace corrsync
