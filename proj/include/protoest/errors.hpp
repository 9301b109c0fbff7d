#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace protoest {

enum class ErrorKind {
  NonSquare,
  NotSymmetric,
  NonFinite,
  EmptyInput,
  DimensionMismatch,
  DegenerateWorld,
  ParseError,
  RaggedRows,
  NonFiniteValue,
  SingleClass,
  DegenerateIntraClassVariance,
  ZeroTotalVariance,
  InsufficientClasses,
  InsufficientSamplesPerClass,
  DimensionTooLarge,
  DegenerateDenominator,
  InvalidDelta,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonSquare: return "NonSquare";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DegenerateWorld: return "DegenerateWorld";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::RaggedRows: return "RaggedRows";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::DegenerateIntraClassVariance: return "DegenerateIntraClassVariance";
    case ErrorKind::ZeroTotalVariance: return "ZeroTotalVariance";
    case ErrorKind::InsufficientClasses: return "InsufficientClasses";
    case ErrorKind::InsufficientSamplesPerClass: return "InsufficientSamplesPerClass";
    case ErrorKind::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorKind::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorKind::InvalidDelta: return "InvalidDelta";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace protoest
