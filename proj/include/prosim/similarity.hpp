#pragma once

#include "prosim/audio.hpp"
#include "prosim/pitch.hpp"

#include <Eigen/Core>

#include <span>
#include <string>

namespace prosim {

// All similarity scores share one orientation: higher means more similar.
// Distance-like measures are negated at this boundary.

enum class MetricKind { ScalarDifference, VectorCosine, SpectralConvergence };

struct SimilarityMetric {
  std::string name;
  MetricKind kind;
};

// Spectrograms are resampled to this many frames before comparison.
inline constexpr int kSpectrogramFrames = 64;

// -|x - y|
double scalar_similarity(double x, double y);

// u.v / (|u| |v|). Throws DimensionMismatch or ZeroVector.
double cosine_similarity(std::span<const double> u, std::span<const double> v);
double cosine_similarity(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

// Linear interpolation of the time axis to `frames` rows.
Eigen::MatrixXd resample_frames(const Eigen::MatrixXd& m, int frames = kSpectrogramFrames);

double spectrogram_similarity(const MelSpectrogram& a, const MelSpectrogram& b);

// Symmetrized spectral convergence (a distance, >= 0):
//   (|A - B|_F / |A|_F + |B - A|_F / |B|_F) / 2
// Throws ZeroReference if either spectrogram is all zero.
double spectral_convergence(const MelSpectrogram& a, const MelSpectrogram& b);

// Similarity form of spectral_convergence (-SC).
double spectral_convergence_similarity(const MelSpectrogram& a, const MelSpectrogram& b);

// (c0, c1, c2): height, slope and convexity.
Eigen::Vector3d lp_combined_vector(const LegendreCoeffs& l);

}  // namespace prosim
