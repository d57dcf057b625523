#include "prosim/error.hpp"

namespace prosim {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoError: return "IoError";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::EmptyAudio: return "EmptyAudio";
    case Errc::TooShort: return "TooShort";
    case Errc::NoVoicedFrames: return "NoVoicedFrames";
    case Errc::TooFewVoicedFrames: return "TooFewVoicedFrames";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ZeroReference: return "ZeroReference";
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::Truncated: return "Truncated";
    case Errc::LayerOutOfRange: return "LayerOutOfRange";
    case Errc::InsufficientClips: return "InsufficientClips";
    case Errc::NoEvaluableTriads: return "NoEvaluableTriads";
    case Errc::MissingStack: return "MissingStack";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::MissingFeature: return "MissingFeature";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::TooFewTriads: return "TooFewTriads";
    case Errc::ParseError: return "ParseError";
    case Errc::AudioMissing: return "AudioMissing";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::StudyComplete: return "StudyComplete";
    case Errc::DuplicateJudgment: return "DuplicateJudgment";
    case Errc::UnknownTriad: return "UnknownTriad";
    case Errc::SessionMismatch: return "SessionMismatch";
    case Errc::NotFound: return "NotFound";
    case Errc::MissingData: return "MissingData";
    case Errc::PortInUse: return "PortInUse";
  }
  return "Unknown";
}

}  // namespace prosim
