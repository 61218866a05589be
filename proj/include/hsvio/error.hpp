#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hsvio {

enum class ErrorCode {
  // geometry
  DegenerateGeometry,
  CheiralityAmbiguous,
  LowParallax,
  // imaging
  TooSmall,
  OutOfBounds,
  PatchOutOfBounds,
  // imu
  GapTooLarge,
  // direct alignment
  TooFewPoints,
  IllConditioned,
  // tracking
  InitFailed,
  TrackingLost,
  RecoveryFailed,
  EmptyDataset,
  // metrics
  NoOverlap,
  DeltaTooLarge,
  DegenerateAlignment,
  // io / config
  MissingFile,
  MalformedCsv,
  NonMonotoneTimestamps,
  ConfigInvalid,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::CheiralityAmbiguous: return "CheiralityAmbiguous";
    case ErrorCode::LowParallax: return "LowParallax";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::PatchOutOfBounds: return "PatchOutOfBounds";
    case ErrorCode::GapTooLarge: return "GapTooLarge";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::InitFailed: return "InitFailed";
    case ErrorCode::TrackingLost: return "TrackingLost";
    case ErrorCode::RecoveryFailed: return "RecoveryFailed";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::DeltaTooLarge: return "DeltaTooLarge";
    case ErrorCode::DegenerateAlignment: return "DegenerateAlignment";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::NonMonotoneTimestamps: return "NonMonotoneTimestamps";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hsvio
