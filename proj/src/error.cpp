#include "mldetect/error.hpp"

namespace mldetect {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyAfterClip: return "EmptyAfterClip";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::RegionTooSmall: return "RegionTooSmall";
    case ErrorCode::GridTooSmall: return "GridTooSmall";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::DegenerateNegatives: return "DegenerateNegatives";
    case ErrorCode::NoPositives: return "NoPositives";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::InsufficientPairs: return "InsufficientPairs";
    case ErrorCode::NoGroundTruth: return "NoGroundTruth";
    case ErrorCode::UnknownImageId: return "UnknownImageId";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::MissingAverages: return "MissingAverages";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::ContractMismatch: return "ContractMismatch";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace mldetect
