#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ascvol {

enum class Errc {
  // volume io
  BadMagic,
  UnsupportedDatatype,
  UnsupportedDims,
  UnsupportedEndianness,
  InvalidHeader,
  NonBinaryMask,
  TruncatedFile,
  PreDecompressRequired,
  IoFailure,
  // grids and arguments
  InvalidGrid,
  InvalidParameter,
  DimMismatch,
  SpacingMismatch,
  LengthMismatch,
  EmptyInput,
  EmptyForeground,
  ZeroSd,
  // quantify / metrics / stats
  ZeroReference,
  EmptyMatrix,
  TooFewSamples,
  ConstantInput,
  // phantoms
  OverlappingPockets,
  PocketOutsideBody,
  InvalidBand,
  // active learning
  KTooLarge,
  UnknownId,
  AlreadyLabeled,
  // reporting
  ManifestError,
  UnsupportedFormat,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedDatatype: return "UnsupportedDatatype";
    case Errc::UnsupportedDims: return "UnsupportedDims";
    case Errc::UnsupportedEndianness: return "UnsupportedEndianness";
    case Errc::InvalidHeader: return "InvalidHeader";
    case Errc::NonBinaryMask: return "NonBinaryMask";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::PreDecompressRequired: return "PreDecompressRequired";
    case Errc::IoFailure: return "IoFailure";
    case Errc::InvalidGrid: return "InvalidGrid";
    case Errc::InvalidParameter: return "InvalidParameter";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::SpacingMismatch: return "SpacingMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptyForeground: return "EmptyForeground";
    case Errc::ZeroSd: return "ZeroSd";
    case Errc::ZeroReference: return "ZeroReference";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::ConstantInput: return "ConstantInput";
    case Errc::OverlappingPockets: return "OverlappingPockets";
    case Errc::PocketOutsideBody: return "PocketOutsideBody";
    case Errc::InvalidBand: return "InvalidBand";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::UnknownId: return "UnknownId";
    case Errc::AlreadyLabeled: return "AlreadyLabeled";
    case Errc::ManifestError: return "ManifestError";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code logic) can branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, Errc code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace ascvol
