#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace extrseg {

enum class Errc {
  MalformedImage,
  UnsupportedFormat,
  DegeneratePolygon,
  DimensionMismatch,
  RunSumMismatch,
  EmptyInput,
  PointOutsideBox,
  ClicksOutOfBounds,
  BoxOutOfBounds,
  EmptyMask,
  MalformedRecord,
  NoValidRecords,
  IoFailure,
  InvalidArgument,
};

constexpr std::string_view to_string(Errc e) noexcept {
  switch (e) {
    case Errc::MalformedImage: return "MalformedImage";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::DegeneratePolygon: return "DegeneratePolygon";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::RunSumMismatch: return "RunSumMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::PointOutsideBox: return "PointOutsideBox";
    case Errc::ClicksOutOfBounds: return "ClicksOutOfBounds";
    case Errc::BoxOutOfBounds: return "BoxOutOfBounds";
    case Errc::EmptyMask: return "EmptyMask";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::NoValidRecords: return "NoValidRecords";
    case Errc::IoFailure: return "IoFailure";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable error code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace extrseg
