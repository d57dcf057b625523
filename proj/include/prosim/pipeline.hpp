#pragma once

// Batch operations behind the command-line tool. Each takes plain inputs
// and returns what it wrote, so the CLI, the Python module and the tests
// share one implementation.

#include "prosim/audio.hpp"
#include "prosim/corpus.hpp"
#include "prosim/features.hpp"
#include "prosim/manifest.hpp"
#include "prosim/pitch.hpp"
#include "prosim/report.hpp"
#include "prosim/trainer.hpp"
#include "prosim/triad.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace prosim {

struct ExtractOptions {
  std::filesystem::path alignment_dir;  // *.txt, *.tsv, *.TextGrid
  std::filesystem::path audio_dir;      // <conversation_id>.wav
  std::filesystem::path out_dir;        // clips/, manifest.jsonl, review.csv
  std::string dataset = "corpus";
  double isolation_gap_s = 0.5;
  double pad_s = 0.1;
  int target_rate = kCanonicalRate;
  std::set<std::string> inventory = default_inventory();
  std::map<std::string, std::string> extra_variants;
  int jobs = 1;
};

struct ExtractFailure {
  std::string conversation_id;
  std::string code;
  std::string message;
};

struct ExtractSummary {
  std::size_t conversations = 0;
  std::size_t candidates = 0;
  std::size_t clips = 0;
  std::vector<std::string> warnings;
  std::vector<ExtractFailure> failures;
  std::filesystem::path manifest_path;
  std::filesystem::path review_path;
};

// Conversations are processed independently; a failing one is recorded and
// skipped. Clips are ordered by conversation, then time.
ExtractSummary run_extract(const ExtractOptions& opt);

// Per-clip pitch statistics and Legendre fits. Clips that cannot be loaded
// or analyzed still produce a row carrying the reason.
std::vector<ClipFeatures> compute_features(const Manifest& manifest, const PitchConfig& cfg = {},
                                           int jobs = 1);

struct EvalOptions {
  bool pitch_rows = true;
  bool lp_rows = true;
  bool spectral_rows = true;
  std::vector<std::string> models;  // embedding models; empty means every model in the manifest
  bool oracle_row = false;          // reads the consensus pair; always 100%
  bool random_row = false;          // seeded uniform scores
  std::uint64_t seed = 17;
  MelConfig mel;
  int jobs = 1;
};

struct EvalResult {
  AgreementReport report;
  std::vector<LayerCurve> curves;  // one per (model, dataset)
};

EvalResult run_eval(const std::vector<ConsensusTriad>& consensus, const FeatureMap& features,
                    const Manifest& manifest, const EvalOptions& opt);

StackSet load_stacks(const Manifest& manifest, const std::string& model);
std::vector<std::string> manifest_models(const Manifest& manifest);

// Seeded scores that ignore the clips; the chance-level reference.
TriadScorer random_scorer(std::uint64_t seed);
TriadScorer oracle_scorer();

// Model files, per-fold reports and the sweep table under out_dir.
struct TrainOutputs {
  ProtocolResult result;
  std::vector<std::filesystem::path> files;
};
TrainOutputs run_train(const std::vector<ConsensusTriad>& consensus, const FeatureTable& table,
                       const TrainConfig& cfg, const std::filesystem::path& out_dir);

// Record of one command invocation, written next to its outputs.
struct RunManifest {
  std::string command;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::uint64_t seed = 17;
  std::map<std::string, std::string> inputs;  // path -> content hash
  std::vector<std::string> outputs;
  std::string timestamp;
  std::string version;

  void add_input(const std::filesystem::path& p);
  nlohmann::ordered_json to_json() const;
  void write(const std::filesystem::path& path) const;
};

// FNV-1a 64 of the file bytes, hex; empty for a missing file. Directories
// hash their sorted (relative path, content hash) listing.
std::string content_hash(const std::filesystem::path& p);

std::string utc_timestamp();

}  // namespace prosim
