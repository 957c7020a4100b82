#pragma once

#include <stdexcept>
#include <string>

namespace wellscape {

enum class ErrorKind {
  InvalidGrid,
  NotAdmissible,
  ZeroSmoothing,
  EmptyB,
  EmptyPiM,
  TauOne,
  ResolutionTooCoarse,
  UnsupportedProfile,
  DegenerateInterval,
  BandEmpty,
  Diverged,
  BracketNotFound,
  ConfigError,
  IoError,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidGrid: return "InvalidGrid";
    case ErrorKind::NotAdmissible: return "NotAdmissible";
    case ErrorKind::ZeroSmoothing: return "ZeroSmoothing";
    case ErrorKind::EmptyB: return "EmptyB";
    case ErrorKind::EmptyPiM: return "EmptyPiM";
    case ErrorKind::TauOne: return "TauOne";
    case ErrorKind::ResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorKind::UnsupportedProfile: return "UnsupportedProfile";
    case ErrorKind::DegenerateInterval: return "DegenerateInterval";
    case ErrorKind::BandEmpty: return "BandEmpty";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::BracketNotFound: return "BracketNotFound";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an Error carrying its kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace wellscape
