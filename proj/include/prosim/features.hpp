#pragma once

#include "prosim/audio.hpp"
#include "prosim/manifest.hpp"
#include "prosim/pitch.hpp"
#include "prosim/trainer.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace prosim {

// Per-clip pitch features. Missing parts carry a reason instead of failing
// the batch.
struct ClipFeatures {
  std::string clip_id;
  std::optional<PitchStats> pitch;
  std::optional<LegendreCoeffs> lp;
  std::size_t voiced_len = 0;
  std::string reason;  // empty when every feature is present
};

ClipFeatures compute_clip_features(const Waveform& w, const PitchConfig& cfg = {});

nlohmann::ordered_json to_json(const ClipFeatures& f);
ClipFeatures features_from_json(const nlohmann::json& j);

using FeatureMap = std::map<std::string, ClipFeatures>;

FeatureMap read_features(const std::filesystem::path& path);
void write_features(const std::vector<ClipFeatures>& rows, const std::filesystem::path& path);

// Input vectors for the trainer. Pitch-derived kinds come from `features`;
// embedding kinds read one layer from each clip's stack for the model named
// in `spec`. Clips without the required data are left out.
FeatureTable build_input_table(const InputSpec& spec, const FeatureMap& features,
                               const Manifest& manifest);

}  // namespace prosim
