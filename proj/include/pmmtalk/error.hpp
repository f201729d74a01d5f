#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pmmtalk {

enum class ErrorKind {
  // configuration
  UnknownConfigKey,
  BadConfigValue,
  // data / input
  MissingColumn,
  ValueOutOfRange,
  NonMonotonicTimecode,
  TooShort,
  UnknownChannel,
  UnsupportedEncoding,
  EmptyAudio,
  OrphanFile,
  TooFewSubjects,
  InsufficientGenderCoverage,
  MissingGender,
  IoFailure,
  ClipTooShort,
  NoTextSource,
  BadMagic,
  TruncatedPayload,
  DimensionMismatch,
  LengthMismatch,
  ShapeMismatch,
  ZeroVector,
  UnknownStyle,
  EmptyPartition,
  PreconditionFailed,
  ProviderFailure,
  // runtime
  DivergedLoss,
};

enum class ErrorCategory { Config, Data, Runtime };

std::string_view to_string(ErrorKind kind);
ErrorCategory category_of(ErrorKind kind);

/// Single exception type for the library; `kind()` carries the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownConfigKey: return "UnknownConfigKey";
    case ErrorKind::BadConfigValue: return "BadConfigValue";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorKind::NonMonotonicTimecode: return "NonMonotonicTimecode";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::UnknownChannel: return "UnknownChannel";
    case ErrorKind::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorKind::EmptyAudio: return "EmptyAudio";
    case ErrorKind::OrphanFile: return "OrphanFile";
    case ErrorKind::TooFewSubjects: return "TooFewSubjects";
    case ErrorKind::InsufficientGenderCoverage: return "InsufficientGenderCoverage";
    case ErrorKind::MissingGender: return "MissingGender";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::ClipTooShort: return "ClipTooShort";
    case ErrorKind::NoTextSource: return "NoTextSource";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::TruncatedPayload: return "TruncatedPayload";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::UnknownStyle: return "UnknownStyle";
    case ErrorKind::EmptyPartition: return "EmptyPartition";
    case ErrorKind::PreconditionFailed: return "PreconditionFailed";
    case ErrorKind::ProviderFailure: return "ProviderFailure";
    case ErrorKind::DivergedLoss: return "DivergedLoss";
  }
  return "Unknown";
}

inline ErrorCategory category_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownConfigKey:
    case ErrorKind::BadConfigValue:
      return ErrorCategory::Config;
    case ErrorKind::DivergedLoss:
      return ErrorCategory::Runtime;
    default:
      return ErrorCategory::Data;
  }
}

}  // namespace pmmtalk
