#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prefcost {

enum class ErrorCode {
  OrderViolation,
  NonFinite,
  DomainError,
  UnknownClass,
  SizeLimit,
  DegenerateField,
  PoolTooSmall,
  DimensionMismatch,
  MissingPrior,
  EmptyContext,
  NonConvergence,
  NoPath,
  OutOfBounds,
  EmptyPath,
  GraphMismatch,
  InvalidArgument,
  FormatError,
  IoError,
  NotFound,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OrderViolation: return "OrderViolation";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::SizeLimit: return "SizeLimit";
    case ErrorCode::DegenerateField: return "DegenerateField";
    case ErrorCode::PoolTooSmall: return "PoolTooSmall";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MissingPrior: return "MissingPrior";
    case ErrorCode::EmptyContext: return "EmptyContext";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NoPath: return "NoPath";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::EmptyPath: return "EmptyPath";
    case ErrorCode::GraphMismatch: return "GraphMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NotFound: return "NotFound";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so that
/// callers (CLI, HTTP service, benchmark) can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace prefcost
