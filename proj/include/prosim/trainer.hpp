#pragma once

#include "prosim/rng.hpp"
#include "prosim/triad.hpp"

#include <Eigen/Core>

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace prosim {

using FeatureTable = std::map<std::string, Eigen::VectorXd>;

enum class InputKind { EmbeddingLayer, Lp3, Lp3VoicedLen };

struct InputSpec {
  InputKind kind = InputKind::Lp3VoicedLen;
  std::string model;  // embedding-layer only
  int layer = 0;      // embedding-layer only

  // "lp3", "lp3+voiced_len" or "embedding:<model>:<layer>"
  std::string label() const;
  static InputSpec parse(const std::string& s);
};

struct TrainConfig {
  double margin = 0.5;
  std::vector<int> latent_dims = {2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
  int folds = 5;
  double holdout_frac = 0.2;
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  int patience = 20;
  std::uint64_t seed = 17;
  bool normalize = true;
  // latent_dim > input_dim gives a rank-limited map; such runs are flagged,
  // or skipped when this is false.
  bool allow_rank_deficient = true;
  int jobs = 1;
  InputSpec input;

  void validate() const;
};

// Latent sizes 2^n for n = 1..10, or {2, 4, 8} for pitch-derived inputs.
std::vector<int> default_latent_dims(InputKind kind);

struct Normalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // zero-variance dimensions are stored as 1

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  static Normalizer identity(Eigen::Index dim);
};

// Per-dimension z-normalization from the given clips. Throws DegenerateInput
// when every dimension has zero variance.
Normalizer fit_normalizer(const std::vector<std::string>& clip_ids, const FeatureTable& features);

// Linear map without bias: latent = W * normalize(x).
struct ProjectionModel {
  Eigen::MatrixXd weights;  // latent_dim x input_dim
  Normalizer normalizer;
  std::string input_kind;

  Eigen::Index input_dim() const { return weights.cols(); }
  Eigen::Index latent_dim() const { return weights.rows(); }
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
};

nlohmann::ordered_json to_json(const ProjectionModel& m);
ProjectionModel model_from_json(const nlohmann::json& j);

// Rows are samples.
struct TripletBatch {
  Eigen::MatrixXd anchor;
  Eigen::MatrixXd positive;
  Eigen::MatrixXd negative;
};

// Mean over rows of max(|a - p| - |a - n| + margin, 0). Throws ShapeMismatch.
double triplet_loss(const Eigen::MatrixXd& a, const Eigen::MatrixXd& p, const Eigen::MatrixXd& n,
                    double margin);

struct LossGradient {
  double loss = 0.0;
  Eigen::MatrixXd grad;  // d loss / d weights
};

// Triplet loss of the projected batch (inputs already normalized) and its
// gradient with respect to the projection weights.
LossGradient projected_triplet_loss(const Eigen::MatrixXd& weights, const TripletBatch& inputs,
                                    double margin);

struct TripletIds {
  std::string anchor;
  std::string positive;
  std::string negative;
};

// The consensus pair's clips become anchor and positive in random order, the
// remaining clip the negative. Throws MissingFeature.
TripletIds make_triplets(const ConsensusTriad& t, const FeatureTable& features, Rng& rng);

struct TrainResult {
  ProjectionModel model;
  std::vector<double> loss_history;  // mean training loss per epoch
  double final_loss = 0.0;
  int epochs_run = 0;
  std::optional<double> best_val_agreement;
};

// Adam on the mean triplet loss over mini-batches. With a validation set the
// weights with the best validation agreement are kept and training stops
// after `patience` epochs without improvement.
TrainResult train_projection(const std::vector<ConsensusTriad>& train, const FeatureTable& features,
                             const TrainConfig& cfg, int latent_dim,
                             const std::vector<ConsensusTriad>& validation = {},
                             std::uint64_t seed = 17);

// Agreement using cosine similarity in latent space.
AgreementResult latent_agreement(const ProjectionModel& model,
                                 const std::vector<ConsensusTriad>& triads,
                                 const FeatureTable& features);

// Agreement using cosine similarity on the raw input vectors.
AgreementResult raw_agreement(const std::vector<ConsensusTriad>& triads,
                              const FeatureTable& features);

struct ProtocolSplit {
  std::vector<std::size_t> holdout;
  std::vector<std::vector<std::size_t>> folds;  // validation indices per fold
  std::vector<std::size_t> development;         // everything not in holdout
};

// Seeded triad-level split: round(n * holdout_frac) held out, the rest dealt
// into `folds` near-equal folds. Throws TooFewTriads.
ProtocolSplit split_protocol(std::size_t n, int folds, double holdout_frac, std::uint64_t seed);

struct FoldReport {
  int fold = 0;
  int latent_dim = 0;
  double val_agreement = 0.0;
  double test_agreement = 0.0;
  double final_loss = 0.0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  int epochs_run = 0;
  bool rank_deficient = false;
};

struct ProtocolResult {
  std::vector<FoldReport> reports;
  std::vector<ProjectionModel> models;  // parallel to reports
  AgreementResult raw_holdout;          // untrained cosine baseline on the holdout
  std::size_t n_used = 0;               // triads with features for all clips
  std::size_t n_dropped = 0;
  int input_dim = 0;
};

ProtocolResult run_protocol(const std::vector<ConsensusTriad>& consensus,
                            const FeatureTable& features, const TrainConfig& cfg);

std::string fold_reports_csv(const std::vector<FoldReport>& reports);
// latent_dim, mean and std of test agreement, then the per-fold values.
std::string sweep_csv(const std::vector<FoldReport>& reports);

}  // namespace prosim
