#pragma once

#include "prosim/audio.hpp"

#include <array>
#include <optional>
#include <vector>

namespace prosim {

struct PitchFrame {
  double time_s = 0.0;
  std::optional<double> f0;  // empty when unvoiced

  bool voiced() const { return f0.has_value(); }
};

struct PitchContour {
  std::vector<PitchFrame> frames;
  double hop_s = 0.01;
  double floor_hz = 75.0;
  double ceil_hz = 600.0;

  std::size_t voiced_count() const;
};

struct PitchConfig {
  double floor_hz = 75.0;
  double ceil_hz = 600.0;
  double hop_s = 0.01;
  // Minimum normalized autocorrelation peak for a frame to count as voiced.
  double voicing_threshold = 0.45;
  // Frames whose local peak amplitude is below this fraction of the global
  // peak are unvoiced regardless of periodicity.
  double silence_threshold = 0.03;
  // Per-octave penalty on long lags, biasing towards the shortest period.
  double octave_cost = 0.01;
};

// Normalized-autocorrelation tracker (Hann window of 3 / floor_hz seconds,
// autocorrelation divided by the window's own autocorrelation, parabolic
// peak interpolation). Throws TooShort if the waveform is shorter than one
// analysis window.
PitchContour track_pitch(const Waveform& w, const PitchConfig& cfg = {});

struct PitchStats {
  double mean_hz = 0.0;
  double min_hz = 0.0;
  double max_hz = 0.0;
  double range_hz = 0.0;
  std::size_t voiced_len = 0;
};

// Statistics over voiced frames; throws NoVoicedFrames.
PitchStats pitch_stats(const PitchContour& c);

// Coefficients of P0..P3 over voiced-frame time mapped to [-1, 1].
// c[0] height, c[1] slope, c[2] convexity.
struct LegendreCoeffs {
  std::array<double, 4> c{};

  double height() const { return c[0]; }
  double slope() const { return c[1]; }
  double convexity() const { return c[2]; }
};

inline constexpr std::size_t kMinVoicedForLegendre = 4;

double legendre(int order, double t);

// Least-squares fit over voiced frames only; unvoiced gaps are left out, not
// interpolated. Throws TooFewVoicedFrames below four voiced frames.
LegendreCoeffs fit_legendre(const PitchContour& c);

}  // namespace prosim
