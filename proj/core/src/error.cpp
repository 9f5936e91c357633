#include "depthcod/error.hpp"

namespace depthcod {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingDirectory: return "MissingDirectory";
    case ErrorCode::StemMismatch: return "StemMismatch";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::BadShape: return "BadShape";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::VariantUnsupported: return "VariantUnsupported";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptArchive: return "CorruptArchive";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace depthcod
