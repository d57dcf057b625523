#include "prosim/trainer.hpp"

#include "prosim/error.hpp"
#include "prosim/parallel.hpp"
#include "prosim/report.hpp"
#include "prosim/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace prosim {

using nlohmann::json;
using nlohmann::ordered_json;

std::string InputSpec::label() const {
  switch (kind) {
    case InputKind::Lp3: return "lp3";
    case InputKind::Lp3VoicedLen: return "lp3+voiced_len";
    case InputKind::EmbeddingLayer: return "embedding:" + model + ":" + std::to_string(layer);
  }
  return "lp3";
}

InputSpec InputSpec::parse(const std::string& s) {
  InputSpec spec;
  if (s == "lp3") {
    spec.kind = InputKind::Lp3;
  } else if (s == "lp3+voiced_len" || s == "lp3+len") {
    spec.kind = InputKind::Lp3VoicedLen;
  } else if (s.starts_with("embedding:")) {
    const auto rest = s.substr(10);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0) {
      throw Error(Errc::InvalidArgument, "expected embedding:<model>:<layer>, got " + s);
    }
    spec.kind = InputKind::EmbeddingLayer;
    spec.model = rest.substr(0, colon);
    try {
      spec.layer = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(Errc::InvalidArgument, "bad layer index in " + s);
    }
    if (spec.layer < 0) throw Error(Errc::InvalidArgument, "negative layer in " + s);
  } else {
    throw Error(Errc::InvalidArgument, "unknown input kind " + s);
  }
  return spec;
}

void TrainConfig::validate() const {
  if (!(margin > 0.0)) throw Error(Errc::InvalidArgument, "margin must be positive");
  if (!(holdout_frac > 0.0 && holdout_frac < 1.0)) {
    throw Error(Errc::InvalidArgument, "holdout fraction must be in (0, 1)");
  }
  if (folds < 2) throw Error(Errc::InvalidArgument, "need at least two folds");
  if (epochs < 1 || batch_size < 1) throw Error(Errc::InvalidArgument, "epochs and batch must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(Errc::InvalidArgument, "learning rate must be positive");
  for (int d : latent_dims) {
    if (d < 1) throw Error(Errc::InvalidArgument, "latent dimensions must be >= 1");
  }
}

std::vector<int> default_latent_dims(InputKind kind) {
  if (kind != InputKind::EmbeddingLayer) return {2, 4, 8};
  std::vector<int> dims;
  for (int n = 1; n <= 10; ++n) dims.push_back(1 << n);
  return dims;
}

Eigen::VectorXd Normalizer::apply(const Eigen::VectorXd& x) const {
  if (x.size() != mean.size()) throw Error(Errc::DimensionMismatch, "normalizer input size");
  return (x - mean).cwiseQuotient(stddev);
}

Normalizer Normalizer::identity(Eigen::Index dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

Normalizer fit_normalizer(const std::vector<std::string>& clip_ids, const FeatureTable& features) {
  if (clip_ids.empty()) throw Error(Errc::DegenerateInput, "no clips to normalize");
  const Eigen::Index dim = features.at(clip_ids.front()).size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  for (const auto& id : clip_ids) sum += features.at(id);
  const Eigen::VectorXd mean = sum / static_cast<double>(clip_ids.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto& id : clip_ids) var += (features.at(id) - mean).cwiseAbs2();
  var /= static_cast<double>(clip_ids.size());

  Normalizer n{mean, var.cwiseSqrt()};
  bool any = false;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (n.stddev(i) > 1e-12 * std::max(1.0, std::abs(mean(i)))) {
      any = true;
    } else {
      n.stddev(i) = 1.0;
    }
  }
  if (!any) throw Error(Errc::DegenerateInput, "every input dimension has zero variance");
  return n;
}

Eigen::VectorXd ProjectionModel::project(const Eigen::VectorXd& x) const {
  return weights * normalizer.apply(x);
}

ordered_json to_json(const ProjectionModel& m) {
  ordered_json j;
  j["input_kind"] = m.input_kind;
  j["input_dim"] = m.input_dim();
  j["latent_dim"] = m.latent_dim();
  j["normalizer"] = {{"means", std::vector<double>(m.normalizer.mean.data(),
                                                   m.normalizer.mean.data() + m.normalizer.mean.size())},
                     {"stds", std::vector<double>(m.normalizer.stddev.data(),
                                                  m.normalizer.stddev.data() + m.normalizer.stddev.size())}};
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(m.weights.size()));
  for (Eigen::Index r = 0; r < m.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < m.weights.cols(); ++c) w.push_back(m.weights(r, c));
  j["weights"] = w;
  return j;
}

ProjectionModel model_from_json(const json& j) {
  try {
    ProjectionModel m;
    m.input_kind = j.value("input_kind", "");
    const auto in = j.at("input_dim").get<Eigen::Index>();
    const auto out = j.at("latent_dim").get<Eigen::Index>();
    const auto means = j.at("normalizer").at("means").get<std::vector<double>>();
    const auto stds = j.at("normalizer").at("stds").get<std::vector<double>>();
    const auto w = j.at("weights").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(means.size()) != in || static_cast<Eigen::Index>(stds.size()) != in ||
        static_cast<Eigen::Index>(w.size()) != in * out) {
      throw Error(Errc::ShapeMismatch, "model file shape mismatch");
    }
    m.normalizer.mean = Eigen::Map<const Eigen::VectorXd>(means.data(), in);
    m.normalizer.stddev = Eigen::Map<const Eigen::VectorXd>(stds.data(), in);
    m.weights.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) m.weights(r, c) = w[static_cast<std::size_t>(r * in + c)];
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("model file: ") + e.what());
  }
}

double triplet_loss(const Eigen::MatrixXd& a, const Eigen::MatrixXd& p, const Eigen::MatrixXd& n,
                    double margin) {
  if (a.rows() != p.rows() || a.rows() != n.rows() || a.cols() != p.cols() || a.cols() != n.cols()) {
    throw Error(Errc::ShapeMismatch, "anchor, positive and negative batches differ in shape");
  }
  if (a.rows() == 0) throw Error(Errc::ShapeMismatch, "empty batch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double dp = (a.row(i) - p.row(i)).norm();
    const double dn = (a.row(i) - n.row(i)).norm();
    total += std::max(dp - dn + margin, 0.0);
  }
  return total / static_cast<double>(a.rows());
}

LossGradient projected_triplet_loss(const Eigen::MatrixXd& weights, const TripletBatch& inputs,
                                    double margin) {
  const auto& a = inputs.anchor;
  const auto& p = inputs.positive;
  const auto& n = inputs.negative;
  if (a.rows() != p.rows() || a.rows() != n.rows() || a.cols() != p.cols() ||
      a.cols() != n.cols() || a.cols() != weights.cols()) {
    throw Error(Errc::ShapeMismatch, "triplet batch does not match projection input size");
  }
  if (a.rows() == 0) throw Error(Errc::ShapeMismatch, "empty batch");

  LossGradient out;
  out.grad = Eigen::MatrixXd::Zero(weights.rows(), weights.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Eigen::VectorXd diff_p = (a.row(i) - p.row(i)).transpose();
    const Eigen::VectorXd diff_n = (a.row(i) - n.row(i)).transpose();
    const Eigen::VectorXd zp = weights * diff_p;
    const Eigen::VectorXd zn = weights * diff_n;
    const double dp = zp.norm();
    const double dn = zn.norm();
    const double hinge = dp - dn + margin;
    if (hinge <= 0.0) continue;
    out.loss += hinge;
    // d|W x| / dW = (W x) x^T / |W x|; zero subgradient at the origin.
    if (dp > 0.0) out.grad.noalias() += (zp / dp) * diff_p.transpose();
    if (dn > 0.0) out.grad.noalias() -= (zn / dn) * diff_n.transpose();
  }
  const double scale = 1.0 / static_cast<double>(a.rows());
  out.loss *= scale;
  out.grad *= scale;
  return out;
}

TripletIds make_triplets(const ConsensusTriad& t, const FeatureTable& features, Rng& rng) {
  for (const auto& id : t.triad.clips) {
    if (!features.count(id)) throw Error(Errc::MissingFeature, "no features for clip " + id);
  }
  auto [i, j] = pair_members(t.consensus_pair);
  if (rng.bernoulli(0.5)) std::swap(i, j);
  return {t.triad.clips[i], t.triad.clips[j], t.triad.clips[pair_complement(t.consensus_pair)]};
}

namespace {

bool has_features(const ConsensusTriad& t, const FeatureTable& features) {
  return std::all_of(t.triad.clips.begin(), t.triad.clips.end(),
                     [&](const std::string& id) { return features.count(id) > 0; });
}

std::vector<std::string> unique_clips(const std::vector<ConsensusTriad>& triads) {
  std::set<std::string> ids;
  for (const auto& t : triads) ids.insert(t.triad.clips.begin(), t.triad.clips.end());
  return {ids.begin(), ids.end()};
}

AgreementResult cosine_agreement(const std::vector<ConsensusTriad>& triads,
                                 const std::map<std::string, Eigen::VectorXd>& vectors) {
  PairScorer score = [&](const std::string& a, const std::string& b) -> std::optional<double> {
    const auto ia = vectors.find(a);
    const auto ib = vectors.find(b);
    if (ia == vectors.end() || ib == vectors.end()) return std::nullopt;
    try {
      return cosine_similarity(ia->second, ib->second);
    } catch (const Error& e) {
      if (e.code() == Errc::ZeroVector) return std::nullopt;
      throw;
    }
  };
  return evaluate_agreement(triads, pairwise(std::move(score)));
}

double safe_agreement(const ProjectionModel& m, const std::vector<ConsensusTriad>& triads,
                      const FeatureTable& features) {
  try {
    return latent_agreement(m, triads, features).percent;
  } catch (const Error& e) {
    if (e.code() == Errc::NoEvaluableTriads) return 0.0;
    throw;
  }
}

}  // namespace

AgreementResult latent_agreement(const ProjectionModel& model,
                                 const std::vector<ConsensusTriad>& triads,
                                 const FeatureTable& features) {
  std::map<std::string, Eigen::VectorXd> latent;
  for (const auto& id : unique_clips(triads)) {
    const auto it = features.find(id);
    if (it != features.end()) latent[id] = model.project(it->second);
  }
  return cosine_agreement(triads, latent);
}

AgreementResult raw_agreement(const std::vector<ConsensusTriad>& triads,
                              const FeatureTable& features) {
  return cosine_agreement(triads, features);
}

TrainResult train_projection(const std::vector<ConsensusTriad>& train, const FeatureTable& features,
                             const TrainConfig& cfg, int latent_dim,
                             const std::vector<ConsensusTriad>& validation, std::uint64_t seed) {
  cfg.validate();
  if (train.empty()) throw Error(Errc::TooFewTriads, "no training triads");
  if (latent_dim < 1) throw Error(Errc::InvalidArgument, "latent dimension must be >= 1");
  Rng rng(seed);

  std::vector<TripletIds> triplets;
  triplets.reserve(train.size());
  for (const auto& t : train) triplets.push_back(make_triplets(t, features, rng));

  const auto clips = unique_clips(train);
  const Eigen::Index input_dim = features.at(clips.front()).size();
  ProjectionModel model;
  model.input_kind = cfg.input.label();
  model.normalizer = cfg.normalize ? fit_normalizer(clips, features) : Normalizer::identity(input_dim);

  std::map<std::string, Eigen::VectorXd> normalized;
  for (const auto& id : clips) normalized[id] = model.normalizer.apply(features.at(id));

  model.weights.resize(latent_dim, input_dim);
  const double init_scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c) model.weights(r, c) = init_scale * rng.normal();

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  Eigen::MatrixXd m1 = Eigen::MatrixXd::Zero(latent_dim, input_dim);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(latent_dim, input_dim);
  long long step = 0;

  TrainResult result;
  Eigen::MatrixXd best_weights = model.weights;
  double best_val = -1.0;
  int since_best = 0;
  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const auto rows = static_cast<Eigen::Index>(end - start);
      TripletBatch batch{Eigen::MatrixXd(rows, input_dim), Eigen::MatrixXd(rows, input_dim),
                         Eigen::MatrixXd(rows, input_dim)};
      for (std::size_t k = start; k < end; ++k) {
        const auto& t = triplets[order[k]];
        const auto r = static_cast<Eigen::Index>(k - start);
        batch.anchor.row(r) = normalized.at(t.anchor).transpose();
        batch.positive.row(r) = normalized.at(t.positive).transpose();
        batch.negative.row(r) = normalized.at(t.negative).transpose();
      }
      const LossGradient lg = projected_triplet_loss(model.weights, batch, cfg.margin);
      epoch_loss += lg.loss * static_cast<double>(rows);

      ++step;
      m1 = kBeta1 * m1 + (1.0 - kBeta1) * lg.grad;
      m2 = kBeta2 * m2 + (1.0 - kBeta2) * lg.grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      model.weights.array() -=
          cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + kEps);
    }
    epoch_loss /= static_cast<double>(order.size());
    result.loss_history.push_back(epoch_loss);
    result.epochs_run = epoch + 1;

    if (!validation.empty()) {
      const double val = safe_agreement(model, validation, features);
      if (val > best_val) {
        best_val = val;
        best_weights = model.weights;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
  }

  if (!validation.empty()) {
    model.weights = best_weights;
    result.best_val_agreement = best_val;
  }

  // Loss of the returned weights over the fixed training triplets.
  TripletBatch all{Eigen::MatrixXd(static_cast<Eigen::Index>(triplets.size()), input_dim),
                   Eigen::MatrixXd(static_cast<Eigen::Index>(triplets.size()), input_dim),
                   Eigen::MatrixXd(static_cast<Eigen::Index>(triplets.size()), input_dim)};
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    all.anchor.row(r) = normalized.at(triplets[k].anchor).transpose();
    all.positive.row(r) = normalized.at(triplets[k].positive).transpose();
    all.negative.row(r) = normalized.at(triplets[k].negative).transpose();
  }
  result.final_loss = projected_triplet_loss(model.weights, all, cfg.margin).loss;
  result.model = std::move(model);
  return result;
}

ProtocolSplit split_protocol(std::size_t n, int folds, double holdout_frac, std::uint64_t seed) {
  if (folds < 2) throw Error(Errc::InvalidArgument, "need at least two folds");
  const auto n_holdout = static_cast<std::size_t>(std::llround(static_cast<double>(n) * holdout_frac));
  if (n < static_cast<std::size_t>(folds) + 1 || n_holdout < 1 ||
      n - n_holdout < static_cast<std::size_t>(folds)) {
    throw Error(Errc::TooFewTriads, std::to_string(n) + " triads cannot fill " +
                                        std::to_string(folds) + " folds plus a holdout");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5B17));
  rng.shuffle(idx);

  ProtocolSplit s;
  s.holdout.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_holdout));
  s.development.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_holdout), idx.end());
  s.folds.resize(static_cast<std::size_t>(folds));
  for (std::size_t k = 0; k < s.development.size(); ++k) {
    s.folds[k % static_cast<std::size_t>(folds)].push_back(s.development[k]);
  }
  return s;
}

ProtocolResult run_protocol(const std::vector<ConsensusTriad>& consensus,
                            const FeatureTable& features, const TrainConfig& cfg) {
  cfg.validate();
  ProtocolResult result;
  std::vector<ConsensusTriad> usable;
  for (const auto& t : consensus) {
    if (has_features(t, features)) usable.push_back(t);
  }
  result.n_used = usable.size();
  result.n_dropped = consensus.size() - usable.size();
  if (usable.empty()) throw Error(Errc::TooFewTriads, "no triads with features for all clips");
  result.input_dim = static_cast<int>(features.at(usable.front().triad.clips[0]).size());

  const ProtocolSplit split = split_protocol(usable.size(), cfg.folds, cfg.holdout_frac, cfg.seed);
  auto pick = [&](const std::vector<std::size_t>& idx) {
    std::vector<ConsensusTriad> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(usable[i]);
    return out;
  };
  const auto holdout = pick(split.holdout);
  result.raw_holdout = raw_agreement(holdout, features);

  struct Job {
    int latent_dim;
    int fold;
  };
  std::vector<Job> jobs;
  for (int dim : cfg.latent_dims) {
    if (dim > result.input_dim && !cfg.allow_rank_deficient) continue;
    for (int f = 0; f < cfg.folds; ++f) jobs.push_back({dim, f});
  }
  result.reports.resize(jobs.size());
  result.models.resize(jobs.size());

  auto run_job = [&](std::size_t k) {
    const Job& job = jobs[k];
    std::vector<std::size_t> train_idx;
    for (int f = 0; f < cfg.folds; ++f) {
      if (f == job.fold) continue;
      const auto& fold = split.folds[static_cast<std::size_t>(f)];
      train_idx.insert(train_idx.end(), fold.begin(), fold.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    const auto train = pick(train_idx);
    const auto val = pick(split.folds[static_cast<std::size_t>(job.fold)]);
    const auto seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(job.latent_dim) * 1000 +
                                                static_cast<std::uint64_t>(job.fold));
    TrainResult tr = train_projection(train, features, cfg, job.latent_dim, val, seed);

    FoldReport rep;
    rep.fold = job.fold;
    rep.latent_dim = job.latent_dim;
    rep.val_agreement = tr.best_val_agreement.value_or(0.0);
    rep.test_agreement = safe_agreement(tr.model, holdout, features);
    rep.final_loss = tr.final_loss;
    rep.n_train = train.size();
    rep.n_val = val.size();
    rep.n_test = holdout.size();
    rep.epochs_run = tr.epochs_run;
    rep.rank_deficient = job.latent_dim > result.input_dim;
    result.reports[k] = rep;
    result.models[k] = std::move(tr.model);
  };

  parallel_for(jobs.size(), cfg.jobs, run_job);
  return result;
}

std::string fold_reports_csv(const std::vector<FoldReport>& reports) {
  std::ostringstream out;
  out << "latent_dim,fold,n_train,n_val,n_test,epochs_run,final_loss,val_agreement,test_agreement,"
         "rank_deficient\n";
  for (const auto& r : reports) {
    char loss[32];
    std::snprintf(loss, sizeof loss, "%.6f", r.final_loss);
    out << r.latent_dim << ',' << r.fold << ',' << r.n_train << ',' << r.n_val << ',' << r.n_test
        << ',' << r.epochs_run << ',' << loss << ',' << format_percent(r.val_agreement) << ','
        << format_percent(r.test_agreement) << ',' << (r.rank_deficient ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string sweep_csv(const std::vector<FoldReport>& reports) {
  std::map<int, std::vector<const FoldReport*>> by_dim;
  std::size_t max_folds = 0;
  for (const auto& r : reports) {
    by_dim[r.latent_dim].push_back(&r);
    max_folds = std::max(max_folds, by_dim[r.latent_dim].size());
  }
  std::ostringstream out;
  out << "latent_dim,mean_test_agreement,std_test_agreement,rank_deficient";
  for (std::size_t f = 0; f < max_folds; ++f) out << ",fold" << f;
  out << '\n';
  for (const auto& [dim, rs] : by_dim) {
    double mean = 0.0;
    for (const auto* r : rs) mean += r->test_agreement;
    mean /= static_cast<double>(rs.size());
    double var = 0.0;
    for (const auto* r : rs) var += (r->test_agreement - mean) * (r->test_agreement - mean);
    const double sd = rs.size() > 1 ? std::sqrt(var / static_cast<double>(rs.size() - 1)) : 0.0;
    out << dim << ',' << format_percent(mean) << ',' << format_percent(sd) << ','
        << (rs.front()->rank_deficient ? 1 : 0);
    for (const auto* r : rs) out << ',' << format_percent(r->test_agreement);
    out << '\n';
  }
  return out.str();
}

}  // namespace prosim
