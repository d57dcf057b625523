#include "prosim/features.hpp"

#include "prosim/embedding_store.hpp"
#include "prosim/error.hpp"

namespace prosim {

using nlohmann::json;
using nlohmann::ordered_json;

ClipFeatures compute_clip_features(const Waveform& w, const PitchConfig& cfg) {
  ClipFeatures f;
  f.clip_id = w.clip_id;
  PitchContour contour;
  try {
    contour = track_pitch(w, cfg);
  } catch (const Error& e) {
    f.reason = std::string(to_string(e.code()));
    return f;
  }
  f.voiced_len = contour.voiced_count();
  try {
    f.pitch = pitch_stats(contour);
  } catch (const Error& e) {
    f.reason = std::string(to_string(e.code()));
    return f;
  }
  try {
    f.lp = fit_legendre(contour);
  } catch (const Error& e) {
    f.reason = std::string(to_string(e.code()));
  }
  return f;
}

ordered_json to_json(const ClipFeatures& f) {
  ordered_json j;
  j["clip_id"] = f.clip_id;
  if (f.pitch) {
    j["pitch"] = {{"mean_hz", f.pitch->mean_hz},
                  {"min_hz", f.pitch->min_hz},
                  {"max_hz", f.pitch->max_hz},
                  {"range_hz", f.pitch->range_hz}};
  } else {
    j["pitch"] = nullptr;
  }
  j["voiced_len"] = f.voiced_len;
  if (f.lp) {
    j["lp"] = {f.lp->c[0], f.lp->c[1], f.lp->c[2], f.lp->c[3]};
  } else {
    j["lp"] = nullptr;
  }
  j["reason"] = f.reason.empty() ? ordered_json(nullptr) : ordered_json(f.reason);
  return j;
}

ClipFeatures features_from_json(const json& j) {
  try {
    ClipFeatures f;
    f.clip_id = j.at("clip_id").get<std::string>();
    f.voiced_len = j.value("voiced_len", std::size_t{0});
    if (j.contains("pitch") && j["pitch"].is_object()) {
      const auto& p = j["pitch"];
      PitchStats s;
      s.mean_hz = p.at("mean_hz").get<double>();
      s.min_hz = p.at("min_hz").get<double>();
      s.max_hz = p.at("max_hz").get<double>();
      s.range_hz = p.at("range_hz").get<double>();
      s.voiced_len = f.voiced_len;
      f.pitch = s;
    }
    if (j.contains("lp") && j["lp"].is_array()) {
      const auto v = j["lp"].get<std::vector<double>>();
      if (v.size() != 4) throw Error(Errc::ParseError, "lp needs four coefficients");
      LegendreCoeffs l;
      for (std::size_t i = 0; i < 4; ++i) l.c[i] = v[i];
      f.lp = l;
    }
    if (j.contains("reason") && j["reason"].is_string()) f.reason = j["reason"].get<std::string>();
    return f;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("features row: ") + e.what());
  }
}

FeatureMap read_features(const std::filesystem::path& path) {
  FeatureMap out;
  for (const auto& row : read_jsonl(path)) {
    auto f = features_from_json(row);
    out[f.clip_id] = std::move(f);
  }
  return out;
}

void write_features(const std::vector<ClipFeatures>& rows, const std::filesystem::path& path) {
  std::vector<ordered_json> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(to_json(r));
  write_jsonl(path, out);
}

FeatureTable build_input_table(const InputSpec& spec, const FeatureMap& features,
                               const Manifest& manifest) {
  FeatureTable table;
  if (spec.kind == InputKind::EmbeddingLayer) {
    for (const auto& clip : manifest.clips) {
      const auto it = clip.emb_paths.find(spec.model);
      if (it == clip.emb_paths.end()) continue;
      const EmbeddingStack s = read_stack(manifest.resolve(it->second));
      const auto v = layer_vector(s, static_cast<std::size_t>(spec.layer));
      table[clip.clip_id] = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    return table;
  }
  for (const auto& [id, f] : features) {
    if (!f.lp) continue;
    if (spec.kind == InputKind::Lp3) {
      table[id] = Eigen::Vector3d(f.lp->c[0], f.lp->c[1], f.lp->c[2]);
    } else {
      Eigen::VectorXd v(4);
      v << f.lp->c[0], f.lp->c[1], f.lp->c[2], static_cast<double>(f.voiced_len);
      table[id] = v;
    }
  }
  return table;
}

}  // namespace prosim
