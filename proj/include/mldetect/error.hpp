#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mldetect {

enum class ErrorCode {
  EmptyAfterClip,
  ImageTooSmall,
  RegionTooSmall,
  GridTooSmall,
  InsufficientData,
  DegenerateNegatives,
  NoPositives,
  DegenerateData,
  InsufficientPairs,
  NoGroundTruth,
  UnknownImageId,
  UnknownCategory,
  MissingAverages,
  MalformedInput,
  ContractMismatch,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mldetect
