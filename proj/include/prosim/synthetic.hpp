#pragma once

#include "prosim/audio.hpp"
#include "prosim/embedding_store.hpp"
#include "prosim/trainer.hpp"
#include "prosim/triad.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace prosim::synth {

std::vector<double> sine(double f0_hz, double dur_s, int rate, double amp = 0.8);
// Band-limited sawtooth (harmonics up to Nyquist).
std::vector<double> sawtooth(double f0_hz, double dur_s, int rate, double amp = 0.8);
std::vector<double> white_noise(double dur_s, int rate, std::uint64_t seed, double amp = 0.5);

// Harmonic "voice" following an f0 contour given over normalized time
// u in [0, 1], with a raised-cosine onset and offset of `ramp_s`.
std::vector<double> voiced_contour(const std::function<double(double)>& f0_of_u, double dur_s,
                                   int rate, double ramp_s = 0.02, double amp = 0.8);

Waveform to_wave(std::vector<double> samples, int rate, std::string clip_id = {});

// Clips whose prosody is a 2-D latent (slope, duration), observed through a
// fixed random linear map into `dim` dimensions plus nuisance noise spanning
// the remaining dim - 2 directions. Raters judge by latent Euclidean
// distance with perceptual noise; only unanimous triads survive.
struct LatentConfig {
  std::size_t n_clips = 500;
  std::size_t dim = 64;
  double snr = 1.0;  // per-coordinate latent variance / nuisance variance
  std::size_t n_triads = 1200;
  int raters = 3;
  double rater_noise = 0.15;  // std of the perceived-distance jitter, latent units
  // Prosodic categories: latents are drawn around `categories` centers on
  // the unit circle (rise/fall x short/long), with this spread per axis.
  int categories = 4;
  double category_spread = 0.25;
  std::uint64_t seed = 17;
};

struct LatentDataset {
  Eigen::MatrixXd latent;    // n_clips x 2
  Eigen::MatrixXd observed;  // n_clips x dim
  std::vector<std::string> clip_ids;
  FeatureTable features;
  std::vector<Triad> triads;
  std::vector<Judgment> judgments;
  std::vector<ConsensusTriad> consensus;
};

LatentDataset make_latent_dataset(const LatentConfig& cfg);

// Consensus triads over fresh clip ids c0..c(3n-1) with uniformly random
// consensus pairs.
std::vector<ConsensusTriad> random_consensus(std::size_t n, std::uint64_t seed);

// Stacks where one layer carries the latent (linearly embedded, small noise)
// and every other layer is independent noise.
StackSet planted_stacks(const LatentDataset& data, const std::string& model, std::size_t n_layers,
                        std::size_t dim, std::size_t signal_layer, std::uint64_t seed);

}  // namespace prosim::synth
