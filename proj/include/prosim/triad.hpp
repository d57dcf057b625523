#pragma once

#include "prosim/embedding_store.hpp"
#include "prosim/manifest.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace prosim {

enum class Pair { AB = 0, AC = 1, BC = 2 };

std::string_view to_string(Pair p);
Pair pair_from_string(std::string_view s);
// Clip positions (0..2) that make up a pair, and the odd one out.
std::array<int, 2> pair_members(Pair p);
int pair_complement(Pair p);
Pair pair_of(int i, int j);

struct Triad {
  std::string triad_id;
  std::string dataset;
  std::string lexical_form;
  std::array<std::string, 3> clips;
};

struct Judgment {
  std::string triad_id;
  std::string rater_id;
  Pair chosen_pair = Pair::AB;
  bool is_attention_check = false;
  std::string timestamp;
};

struct ConsensusTriad {
  Triad triad;
  Pair consensus_pair = Pair::AB;
  int n_raters = 0;
};

nlohmann::ordered_json to_json(const Triad& t);
nlohmann::ordered_json to_json(const Judgment& j);
nlohmann::ordered_json to_json(const ConsensusTriad& c);
Triad triad_from_json(const nlohmann::json& j);
Judgment judgment_from_json(const nlohmann::json& j);
ConsensusTriad consensus_from_json(const nlohmann::json& j);

std::vector<Triad> read_triads(const std::filesystem::path& path);
std::vector<Judgment> read_judgments(const std::filesystem::path& path);
std::vector<ConsensusTriad> read_consensus(const std::filesystem::path& path);
void write_triads(const std::vector<Triad>& triads, const std::filesystem::path& path);
void write_judgments(const std::vector<Judgment>& judgments, const std::filesystem::path& path);
void write_consensus(const std::vector<ConsensusTriad>& consensus, const std::filesystem::path& path);

// Draws `per_dataset_count` distinct triads (unordered clip sets) per dataset,
// uniformly over all same-lexical-form 3-subsets, with clip order shuffled.
// Throws InsufficientClips when a dataset cannot supply that many.
std::vector<Triad> sample_triads(const Manifest& manifest, std::size_t per_dataset_count,
                                 std::uint64_t seed);

inline constexpr int kDefaultRatersPerTriad = 3;

// Keeps triads with exactly `required` non-attention judgments that all chose
// the same pair. Output follows the order of `triads`.
std::vector<ConsensusTriad> consensus_filter(const std::vector<Triad>& triads,
                                             const std::vector<Judgment>& judgments,
                                             int required = kDefaultRatersPerTriad);

// Scores for AB, AC, BC (higher = more similar), or nullopt when the metric
// has no features for some clip in the triad.
using TriadScores = std::array<double, 3>;
using TriadScorer = std::function<std::optional<TriadScores>(const ConsensusTriad&)>;
using PairScorer =
    std::function<std::optional<double>(const std::string& a, const std::string& b)>;

TriadScorer pairwise(PairScorer score);

struct AgreementResult {
  double percent = 0.0;
  std::size_t hits = 0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

// The most similar pair per triad is compared with the consensus pair. A tie
// at the top score counts as a miss. Throws NoEvaluableTriads.
AgreementResult evaluate_agreement(const std::vector<ConsensusTriad>& consensus,
                                   const TriadScorer& scorer);

// Stacks keyed by clip_id, all for one model.
using StackSet = std::map<std::string, EmbeddingStack>;

// One agreement value per layer using cosine similarity of pooled vectors.
// Throws MissingStack when a clip in `consensus` has no stack.
std::vector<AgreementResult> probe_layers(const std::vector<ConsensusTriad>& consensus,
                                          const StackSet& stacks, const std::string& model_name);

}  // namespace prosim
