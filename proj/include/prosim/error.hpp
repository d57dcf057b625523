#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prosim {

enum class Errc {
  InvalidArgument,
  IoError,
  // audio
  UnsupportedFormat,
  EmptyAudio,
  TooShort,
  // pitch
  NoVoicedFrames,
  TooFewVoicedFrames,
  // similarity
  ZeroVector,
  DimensionMismatch,
  ZeroReference,
  // embedding store
  BadMagic,
  VersionMismatch,
  Truncated,
  LayerOutOfRange,
  // triads
  InsufficientClips,
  NoEvaluableTriads,
  MissingStack,
  // trainer
  ShapeMismatch,
  MissingFeature,
  DegenerateInput,
  TooFewTriads,
  // corpus
  ParseError,
  AudioMissing,
  OutOfBounds,
  // study
  StudyComplete,
  DuplicateJudgment,
  UnknownTriad,
  SessionMismatch,
  NotFound,
  MissingData,
  PortInUse,
};

std::string_view to_string(Errc code) noexcept;

// Every failure in the library is reported as an Error carrying a code, so
// callers (CLI, HTTP layer, Python) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace prosim
