#include "prosim/pipeline.hpp"

#include "prosim/embedding_store.hpp"
#include "prosim/error.hpp"
#include "prosim/parallel.hpp"
#include "prosim/rng.hpp"
#include "prosim/similarity.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <optional>

#ifndef PROSIM_VERSION
#define PROSIM_VERSION "0.0.0"
#endif

namespace prosim {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool is_alignment_file(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".txt" || ext == ".tsv" || ext == ".TextGrid" || ext == ".textgrid";
}

}  // namespace

ExtractSummary run_extract(const ExtractOptions& opt) {
  if (!fs::is_directory(opt.alignment_dir)) {
    throw Error(Errc::MissingData, "alignment directory " + opt.alignment_dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(opt.alignment_dir)) {
    if (e.is_regular_file() && is_alignment_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  TokenNormalizer normalizer;
  for (const auto& [from, to] : opt.extra_variants) normalizer.add_variant(from, to);

  fs::create_directories(opt.out_dir);
  CutOptions cut;
  cut.pad_s = opt.pad_s;
  cut.target_rate = opt.target_rate;
  cut.dataset = opt.dataset;
  cut.out_dir = opt.out_dir / "clips";
  cut.manifest_dir = opt.out_dir;

  struct PerFile {
    std::vector<ClipRecord> clips;
    std::vector<std::string> warnings;
    std::size_t candidates = 0;
    std::optional<ExtractFailure> failure;
  };
  std::vector<PerFile> results(files.size());
  parallel_for(files.size(), opt.jobs, [&](std::size_t i) {
    PerFile& r = results[i];
    const std::string conv = files[i].stem().string();
    try {
      AlignmentParse parsed = parse_alignment(files[i]);
      r.warnings = std::move(parsed.warnings);
      const auto candidates =
          extract_feedback(parsed.words, opt.inventory, opt.isolation_gap_s, normalizer, opt.pad_s);
      r.candidates = candidates.size();
      if (candidates.empty()) return;
      const fs::path audio_path = opt.audio_dir / (conv + ".wav");
      if (!fs::exists(audio_path)) throw Error(Errc::AudioMissing, audio_path.string());
      const PcmAudio audio = read_wav(audio_path);
      for (const auto& c : candidates) {
        try {
          r.clips.push_back(cut_clip(audio, c, cut));
        } catch (const Error& e) {
          if (e.code() != Errc::OutOfBounds) throw;
          r.warnings.push_back(conv + ": " + e.what());
        }
      }
    } catch (const Error& e) {
      r.clips.clear();
      r.failure = ExtractFailure{conv, std::string(to_string(e.code())), e.what()};
    }
  });

  ExtractSummary summary;
  summary.conversations = files.size();
  Manifest manifest;
  std::vector<ReviewRow> review;
  for (auto& r : results) {
    summary.candidates += r.candidates;
    summary.warnings.insert(summary.warnings.end(), r.warnings.begin(), r.warnings.end());
    if (r.failure) summary.failures.push_back(*r.failure);
    for (auto& c : r.clips) {
      review.push_back({c.clip_id, c.lexical_form, c.speaker_id, c.wav_path, "pending"});
      manifest.clips.push_back(std::move(c));
    }
  }
  summary.clips = manifest.clips.size();
  summary.manifest_path = opt.out_dir / "manifest.jsonl";
  summary.review_path = opt.out_dir / "review.csv";
  write_manifest(manifest, summary.manifest_path);
  write_review_csv(review, summary.review_path);
  return summary;
}

std::vector<ClipFeatures> compute_features(const Manifest& manifest, const PitchConfig& cfg,
                                           int jobs) {
  std::vector<ClipFeatures> rows(manifest.clips.size());
  parallel_for(manifest.clips.size(), jobs, [&](std::size_t i) {
    const ClipRecord& rec = manifest.clips[i];
    try {
      Waveform w = load_wav(manifest.resolve(rec.wav_path));
      if (w.sample_rate != kCanonicalRate) w = resample(w, kCanonicalRate);
      w.clip_id = rec.clip_id;
      rows[i] = compute_clip_features(w, cfg);
    } catch (const Error& e) {
      rows[i].clip_id = rec.clip_id;
      rows[i].reason = std::string(to_string(e.code()));
    }
  });
  return rows;
}

std::vector<std::string> manifest_models(const Manifest& manifest) {
  std::set<std::string> models;
  for (const auto& c : manifest.clips) {
    for (const auto& [m, p] : c.emb_paths) models.insert(m);
  }
  return {models.begin(), models.end()};
}

StackSet load_stacks(const Manifest& manifest, const std::string& model) {
  StackSet out;
  for (const auto& c : manifest.clips) {
    const auto it = c.emb_paths.find(model);
    if (it == c.emb_paths.end()) continue;
    EmbeddingStack s = read_stack(manifest.resolve(it->second));
    s.clip_id = c.clip_id;
    out.emplace(c.clip_id, std::move(s));
  }
  return out;
}

TriadScorer random_scorer(std::uint64_t seed) {
  return [seed](const ConsensusTriad& t) -> std::optional<TriadScores> {
    Rng rng(derive_seed(seed, fnv1a(t.triad.triad_id)));
    return TriadScores{rng.uniform(), rng.uniform(), rng.uniform()};
  };
}

TriadScorer oracle_scorer() {
  return [](const ConsensusTriad& t) -> std::optional<TriadScores> {
    TriadScores s{0.0, 0.0, 0.0};
    s[static_cast<std::size_t>(t.consensus_pair)] = 1.0;
    return s;
  };
}

namespace {

using ScalarOf = std::function<std::optional<double>(const ClipFeatures&)>;

PairScorer scalar_metric(const FeatureMap& features, ScalarOf get) {
  return [&features, get](const std::string& a, const std::string& b) -> std::optional<double> {
    const auto ia = features.find(a), ib = features.find(b);
    if (ia == features.end() || ib == features.end()) return std::nullopt;
    const auto x = get(ia->second), y = get(ib->second);
    if (!x || !y) return std::nullopt;
    return scalar_similarity(*x, *y);
  };
}

PairScorer lp_combined_metric(const FeatureMap& features) {
  return [&features](const std::string& a, const std::string& b) -> std::optional<double> {
    const auto ia = features.find(a), ib = features.find(b);
    if (ia == features.end() || ib == features.end() || !ia->second.lp || !ib->second.lp) {
      return std::nullopt;
    }
    try {
      return cosine_similarity(Eigen::VectorXd(lp_combined_vector(*ia->second.lp)),
                               Eigen::VectorXd(lp_combined_vector(*ib->second.lp)));
    } catch (const Error&) {
      return std::nullopt;
    }
  };
}

std::map<std::string, MelSpectrogram> spectrograms(const std::vector<ConsensusTriad>& consensus,
                                                   const Manifest& manifest, const MelConfig& mel,
                                                   int jobs) {
  std::set<std::string> ids;
  for (const auto& t : consensus) ids.insert(t.triad.clips.begin(), t.triad.clips.end());
  const std::vector<std::string> order(ids.begin(), ids.end());
  std::vector<std::optional<MelSpectrogram>> specs(order.size());
  parallel_for(order.size(), jobs, [&](std::size_t i) {
    const ClipRecord* rec = manifest.find(order[i]);
    if (rec == nullptr) return;
    try {
      Waveform w = load_wav(manifest.resolve(rec->wav_path));
      if (w.sample_rate != kCanonicalRate) w = resample(w, kCanonicalRate);
      specs[i] = mel_spectrogram(w, mel);
    } catch (const Error&) {
    }
  });
  std::map<std::string, MelSpectrogram> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (specs[i]) out.emplace(order[i], std::move(*specs[i]));
  }
  return out;
}

template <typename F>
PairScorer spectral_metric(const std::map<std::string, MelSpectrogram>& specs, F f) {
  return [&specs, f](const std::string& a, const std::string& b) -> std::optional<double> {
    const auto ia = specs.find(a), ib = specs.find(b);
    if (ia == specs.end() || ib == specs.end()) return std::nullopt;
    try {
      return f(ia->second, ib->second);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
}

// Agreement that tolerates an empty evaluable set: the row still appears,
// with zero evaluated triads.
AgreementResult agreement_or_empty(const std::vector<ConsensusTriad>& triads, const TriadScorer& s) {
  try {
    return evaluate_agreement(triads, s);
  } catch (const Error& e) {
    if (e.code() != Errc::NoEvaluableTriads) throw;
    return {0.0, 0, 0, triads.size()};
  }
}

}  // namespace

EvalResult run_eval(const std::vector<ConsensusTriad>& consensus, const FeatureMap& features,
                    const Manifest& manifest, const EvalOptions& opt) {
  std::map<std::string, std::vector<ConsensusTriad>> by_dataset;
  for (const auto& t : consensus) by_dataset[t.triad.dataset].push_back(t);

  EvalResult out;
  auto add = [&](const std::string& metric, const std::string& ds, const AgreementResult& r) {
    if (r.evaluated == 0) return;
    out.report.set(metric, ds, cell_from(r));
  };

  const auto models = opt.models.empty() ? manifest_models(manifest) : opt.models;
  std::map<std::string, StackSet> stacks;
  for (const auto& m : models) stacks[m] = load_stacks(manifest, m);

  for (const auto& [ds, triads] : by_dataset) {
    if (opt.pitch_rows) {
      const std::vector<std::pair<std::string, ScalarOf>> rows = {
          {"mean pitch", [](const ClipFeatures& f) -> std::optional<double> {
             return f.pitch ? std::optional(f.pitch->mean_hz) : std::nullopt; }},
          {"min pitch", [](const ClipFeatures& f) -> std::optional<double> {
             return f.pitch ? std::optional(f.pitch->min_hz) : std::nullopt; }},
          {"max pitch", [](const ClipFeatures& f) -> std::optional<double> {
             return f.pitch ? std::optional(f.pitch->max_hz) : std::nullopt; }},
          {"voiced length", [](const ClipFeatures& f) -> std::optional<double> {
             return f.pitch ? std::optional(static_cast<double>(f.voiced_len)) : std::nullopt; }},
          {"pitch range", [](const ClipFeatures& f) -> std::optional<double> {
             return f.pitch ? std::optional(f.pitch->range_hz) : std::nullopt; }},
      };
      for (const auto& [name, get] : rows) {
        add(name, ds, agreement_or_empty(triads, pairwise(scalar_metric(features, get))));
      }
    }
    if (opt.lp_rows) {
      const char* names[] = {"height (LP curve)", "slope (LP curve)", "convexity (LP curve)"};
      for (std::size_t k = 0; k < 3; ++k) {
        const ScalarOf get = [k](const ClipFeatures& f) -> std::optional<double> {
          return f.lp ? std::optional(f.lp->c[k]) : std::nullopt;
        };
        add(names[k], ds, agreement_or_empty(triads, pairwise(scalar_metric(features, get))));
      }
      add("LP combined cos. sim.", ds, agreement_or_empty(triads, pairwise(lp_combined_metric(features))));
    }
    for (const auto& m : models) {
      const StackSet& st = stacks.at(m);
      std::vector<ConsensusTriad> covered;
      for (const auto& t : triads) {
        if (std::all_of(t.triad.clips.begin(), t.triad.clips.end(),
                        [&](const std::string& c) { return st.count(c) > 0; })) {
          covered.push_back(t);
        }
      }
      if (covered.empty()) continue;
      auto curve = probe_layers(covered, st, m);
      for (auto& r : curve) r.skipped += triads.size() - covered.size();
      if (std::any_of(curve.begin(), curve.end(), [](const auto& r) { return r.evaluated > 0; })) {
        out.report.set(m + " cos. sim.", ds, cell_from_range(curve));
      }
      out.curves.push_back({m, ds, std::move(curve)});
    }
    if (opt.spectral_rows) {
      const auto specs = spectrograms(triads, manifest, opt.mel, opt.jobs);
      add("spectrogram cos. sim.", ds,
          agreement_or_empty(triads, pairwise(spectral_metric(specs, spectrogram_similarity))));
      add("spectral convergence", ds,
          agreement_or_empty(triads,
                             pairwise(spectral_metric(specs, spectral_convergence_similarity))));
    }
    if (opt.oracle_row) add("consensus oracle", ds, agreement_or_empty(triads, oracle_scorer()));
    if (opt.random_row) add("random scores", ds, agreement_or_empty(triads, random_scorer(opt.seed)));
  }
  return out;
}

TrainOutputs run_train(const std::vector<ConsensusTriad>& consensus, const FeatureTable& table,
                       const TrainConfig& cfg, const fs::path& out_dir) {
  TrainOutputs out;
  out.result = run_protocol(consensus, table, cfg);
  const auto models_dir = out_dir / "models";
  fs::create_directories(models_dir);
  for (std::size_t k = 0; k < out.result.reports.size(); ++k) {
    const auto& rep = out.result.reports[k];
    char name[64];
    std::snprintf(name, sizeof name, "d%04d_f%d.json", rep.latent_dim, rep.fold);
    const auto path = models_dir / name;
    std::ofstream f(path, std::ios::binary);
    f << to_json(out.result.models[k]).dump(1) << '\n';
    if (!f) throw Error(Errc::IoError, "cannot write " + path.string());
    out.files.push_back(path);
  }
  auto write_text = [&](const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) throw Error(Errc::IoError, "cannot write " + path.string());
    out.files.push_back(path);
  };
  write_text(out_dir / "folds.csv", fold_reports_csv(out.result.reports));
  write_text(out_dir / "sweep.csv", sweep_csv(out.result.reports));
  ordered_json summary;
  summary["input_kind"] = cfg.input.label();
  summary["input_dim"] = out.result.input_dim;
  summary["triads_used"] = out.result.n_used;
  summary["triads_dropped"] = out.result.n_dropped;
  summary["raw_holdout_agreement"] = out.result.raw_holdout.percent;
  write_text(out_dir / "summary.json", summary.dump(1) + "\n");
  return out;
}

std::string content_hash(const fs::path& p) {
  std::error_code ec;
  if (fs::is_directory(p, ec)) {
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& e : fs::recursive_directory_iterator(p)) {
      if (e.is_regular_file()) {
        entries.emplace_back(fs::relative(e.path(), p).generic_string(), content_hash(e.path()));
      }
    }
    std::sort(entries.begin(), entries.end());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, digest] : entries) h = fnv1a(name + "\n" + digest + "\n", h);
    return hex64(h);
  }
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  }
  return hex64(h);
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RunManifest::add_input(const fs::path& p) { inputs[p.generic_string()] = content_hash(p); }

ordered_json RunManifest::to_json() const {
  ordered_json j;
  j["command"] = command;
  j["version"] = version.empty() ? PROSIM_VERSION : version;
  j["seed"] = seed;
  j["config"] = config;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["timestamp"] = timestamp.empty() ? utc_timestamp() : timestamp;
  return j;
}

void RunManifest::write(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << to_json().dump(1) << '\n';
  if (!f) throw Error(Errc::IoError, "cannot write " + path.string());
}

}  // namespace prosim
