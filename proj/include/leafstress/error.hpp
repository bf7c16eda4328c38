#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace leafstress {

enum class ErrorKind {
  ShapeMismatch,
  DomainError,
  InvalidAxis,
  InvalidParameter,
  BatchTooSmall,
  InvalidTarget,
  InvalidConfig,
  OutOfRange,
  EmptyDataset,
  LabelMissing,
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  ChecksumMismatch,
  FingerprintMismatch,
  MalformedHeader,
  TruncatedPixelData,
  UnsupportedFormat,
  NoLeafFound,
  EmptyMask,
  EmptyLeafMask,
  SymptomOutsideLeaf,
  InvalidFactor,
  IndexOutOfRange,
  EmptyMatrix,
  IoError,
  CalibrationFailed,
  MissingHeader,
  UnknownLabel,
  MissingSeverity,
  FileNotFound,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries one of the kinds above so that
// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Missing, unreadable or corrupt files: the CLI reports these with exit code 2.
inline bool is_io_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::IoError:
    case ErrorKind::FileNotFound:
    case ErrorKind::BadMagic:
    case ErrorKind::UnsupportedVersion:
    case ErrorKind::TruncatedFile:
    case ErrorKind::ChecksumMismatch:
    case ErrorKind::MalformedHeader:
    case ErrorKind::TruncatedPixelData:
    case ErrorKind::UnsupportedFormat:
      return true;
    default:
      return false;
  }
}

}  // namespace leafstress
