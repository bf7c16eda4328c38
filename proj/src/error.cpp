#include "leafstress/error.hpp"

namespace leafstress {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::InvalidAxis: return "InvalidAxis";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::BatchTooSmall: return "BatchTooSmall";
    case ErrorKind::InvalidTarget: return "InvalidTarget";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::LabelMissing: return "LabelMissing";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorKind::FingerprintMismatch: return "FingerprintMismatch";
    case ErrorKind::MalformedHeader: return "MalformedHeader";
    case ErrorKind::TruncatedPixelData: return "TruncatedPixelData";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::NoLeafFound: return "NoLeafFound";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::EmptyLeafMask: return "EmptyLeafMask";
    case ErrorKind::SymptomOutsideLeaf: return "SymptomOutsideLeaf";
    case ErrorKind::InvalidFactor: return "InvalidFactor";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::CalibrationFailed: return "CalibrationFailed";
    case ErrorKind::MissingHeader: return "MissingHeader";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::MissingSeverity: return "MissingSeverity";
    case ErrorKind::FileNotFound: return "FileNotFound";
  }
  return "Unknown";
}

}  // namespace leafstress
