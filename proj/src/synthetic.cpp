#include "prosim/synthetic.hpp"

#include "prosim/error.hpp"
#include "prosim/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>

namespace prosim::synth {

std::vector<double> sine(double f0_hz, double dur_s, int rate, double amp) {
  const auto n = static_cast<std::size_t>(std::lround(dur_s * rate));
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = amp * std::sin(2.0 * M_PI * f0_hz * static_cast<double>(i) / rate);
  }
  return out;
}

std::vector<double> sawtooth(double f0_hz, double dur_s, int rate, double amp) {
  const auto n = static_cast<std::size_t>(std::lround(dur_s * rate));
  const int harmonics = static_cast<int>(std::floor(0.5 * rate / f0_hz));
  std::vector<double> out(n, 0.0);
  for (int k = 1; k <= harmonics; ++k) {
    const double a = 2.0 / (M_PI * k) * ((k % 2) ? 1.0 : -1.0);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] += a * std::sin(2.0 * M_PI * k * f0_hz * static_cast<double>(i) / rate);
    }
  }
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : out) v *= amp / peak;
  }
  return out;
}

std::vector<double> white_noise(double dur_s, int rate, std::uint64_t seed, double amp) {
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(std::lround(dur_s * rate));
  std::vector<double> out(n);
  for (auto& v : out) v = amp * rng.uniform(-1.0, 1.0);
  return out;
}

std::vector<double> voiced_contour(const std::function<double(double)>& f0_of_u, double dur_s,
                                   int rate, double ramp_s, double amp) {
  const auto n = static_cast<std::size_t>(std::lround(dur_s * rate));
  const auto ramp = static_cast<std::size_t>(std::lround(ramp_s * rate));
  std::vector<double> out(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    const double f0 = f0_of_u(u);
    double v = 0.0;
    for (int k = 1; k <= 6 && k * f0 < 0.45 * rate; ++k) v += std::sin(k * phase) / k;
    double env = 1.0;
    if (ramp > 0 && i < ramp) env = 0.5 - 0.5 * std::cos(M_PI * static_cast<double>(i) / ramp);
    if (ramp > 0 && n - 1 - i < ramp) {
      env = std::min(env, 0.5 - 0.5 * std::cos(M_PI * static_cast<double>(n - 1 - i) / ramp));
    }
    out[i] = amp * env * v / 1.5;
    phase += 2.0 * M_PI * f0 / rate;
    if (phase > 2.0 * M_PI) phase -= 2.0 * M_PI;
  }
  return out;
}

Waveform to_wave(std::vector<double> samples, int rate, std::string clip_id) {
  Waveform w;
  w.samples = std::move(samples);
  w.sample_rate = rate;
  w.clip_id = std::move(clip_id);
  return w;
}

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

}  // namespace

LatentDataset make_latent_dataset(const LatentConfig& cfg) {
  if (cfg.dim < 3 || cfg.n_clips < 3 || cfg.snr <= 0.0 || cfg.raters < 1) {
    throw Error(Errc::InvalidArgument, "latent dataset needs dim >= 3, n_clips >= 3, snr > 0");
  }
  Rng rng(cfg.seed);
  const auto n = static_cast<Eigen::Index>(cfg.n_clips);
  const auto dim = static_cast<Eigen::Index>(cfg.dim);

  LatentDataset d;
  d.latent.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    double cx = 0.0, cy = 0.0, spread = 1.0;
    if (cfg.categories > 0) {
      const auto k = static_cast<double>(rng.below(static_cast<std::uint64_t>(cfg.categories)));
      const double angle = 2.0 * M_PI * (k + 0.5) / cfg.categories;
      cx = std::cos(angle);
      cy = std::sin(angle);
      spread = cfg.category_spread;
    }
    d.latent(i, 0) = cx + spread * rng.normal();
    d.latent(i, 1) = cy + spread * rng.normal();
  }

  // Each latent coordinate sits beside dim - 2 nuisance coordinates of
  // matched variance (scaled by snr); one fixed random rotation mixes them.
  Eigen::MatrixXd stacked(n, dim);
  stacked.leftCols(2) = d.latent;
  const double latent_var = (d.latent.rowwise() - d.latent.colwise().mean()).squaredNorm() /
                            static_cast<double>(2 * n);
  const double nuisance_sd = std::sqrt(latent_var / cfg.snr);
  stacked.rightCols(dim - 2) = nuisance_sd * random_matrix(n, dim - 2, rng);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(dim, dim, rng));
  const Eigen::MatrixXd mix = qr.householderQ();
  d.observed = stacked * mix.transpose();

  Manifest manifest;
  for (Eigen::Index i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "s%04ld", static_cast<long>(i));
    d.clip_ids.emplace_back(id);
    d.features[id] = d.observed.row(i).transpose();
    ClipRecord r;
    r.clip_id = id;
    r.dataset = "synthetic";
    r.lexical_form = "yeah";
    r.speaker_id = "spk";
    r.wav_path = std::string(id) + ".wav";
    manifest.clips.push_back(std::move(r));
  }
  d.triads = sample_triads(manifest, cfg.n_triads, derive_seed(cfg.seed, 1));

  std::map<std::string, Eigen::Index> row;
  for (Eigen::Index i = 0; i < n; ++i) row[d.clip_ids[static_cast<std::size_t>(i)]] = i;
  Rng judge(derive_seed(cfg.seed, 2));
  for (const auto& t : d.triads) {
    std::array<Eigen::Vector2d, 3> z;
    for (int k = 0; k < 3; ++k) z[k] = d.latent.row(row.at(t.clips[k])).transpose();
    for (int r = 0; r < cfg.raters; ++r) {
      Pair best = Pair::AB;
      double best_d = std::numeric_limits<double>::infinity();
      for (Pair p : {Pair::AB, Pair::AC, Pair::BC}) {
        const auto m = pair_members(p);
        const double dist = (z[m[0]] - z[m[1]]).norm() + cfg.rater_noise * judge.normal();
        if (dist < best_d) {
          best_d = dist;
          best = p;
        }
      }
      char rater[16];
      std::snprintf(rater, sizeof rater, "r%02d", r);
      d.judgments.push_back({t.triad_id, rater, best, false, ""});
    }
  }
  d.consensus = consensus_filter(d.triads, d.judgments, cfg.raters);
  return d;
}

std::vector<ConsensusTriad> random_consensus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ConsensusTriad> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ConsensusTriad c;
    char buf[24];
    std::snprintf(buf, sizeof buf, "rand-t%05zu", i);
    c.triad.triad_id = buf;
    c.triad.dataset = "synthetic";
    c.triad.lexical_form = "yeah";
    for (std::size_t k = 0; k < 3; ++k) {
      std::snprintf(buf, sizeof buf, "c%zu", 3 * i + k);
      c.triad.clips[k] = buf;
    }
    c.consensus_pair = static_cast<Pair>(rng.below(3));
    c.n_raters = kDefaultRatersPerTriad;
    out.push_back(std::move(c));
  }
  return out;
}

StackSet planted_stacks(const LatentDataset& data, const std::string& model, std::size_t n_layers,
                        std::size_t dim, std::size_t signal_layer, std::uint64_t seed) {
  if (signal_layer >= n_layers) throw Error(Errc::InvalidArgument, "signal layer out of range");
  Rng rng(seed);
  const Eigen::MatrixXd mix = random_matrix(static_cast<Eigen::Index>(dim), 2, rng);
  StackSet out;
  for (std::size_t i = 0; i < data.clip_ids.size(); ++i) {
    EmbeddingStack s;
    s.clip_id = data.clip_ids[i];
    s.model_name = model;
    s.n_layers = n_layers;
    s.dim = dim;
    s.vectors.resize(n_layers * dim);
    const Eigen::Vector2d z = data.latent.row(static_cast<Eigen::Index>(i)).transpose();
    const Eigen::VectorXd planted = mix * z;
    for (std::size_t l = 0; l < n_layers; ++l) {
      for (std::size_t k = 0; k < dim; ++k) {
        const double v = l == signal_layer ? planted(static_cast<Eigen::Index>(k)) + 0.1 * rng.normal()
                                           : rng.normal();
        s.vectors[l * dim + k] = static_cast<float>(v);
      }
    }
    out.emplace(s.clip_id, std::move(s));
  }
  return out;
}

}  // namespace prosim::synth
