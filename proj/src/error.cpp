#include "corrsync/error.hpp"

#include <fmt/format.h>

namespace corrsync {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MetricAsymmetry: return "MetricAsymmetry";
    case ErrorCode::InvalidMetric: return "InvalidMetric";
    case ErrorCode::DuplicateShapes: return "DuplicateShapes";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::MissingMap: return "MissingMap";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::TooManyPaths: return "TooManyPaths";
    case ErrorCode::OracleBound: return "OracleBound";
    case ErrorCode::EmptyPathSet: return "EmptyPathSet";
    case ErrorCode::EmptyRow: return "EmptyRow";
    case ErrorCode::MaxStepsExceeded: return "MaxStepsExceeded";
    case ErrorCode::BallOverlap: return "BallOverlap";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::NoMatches: return "NoMatches";
    case ErrorCode::NoSharedLabels: return "NoSharedLabels";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::Antipodal: return "Antipodal";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(fmt::format("{}: {}", to_string(code), message)), code_(code) {}

}  // namespace corrsync
