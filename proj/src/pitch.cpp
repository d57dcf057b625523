#include "prosim/pitch.hpp"

#include "prosim/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace prosim {

std::size_t PitchContour::voiced_count() const {
  return static_cast<std::size_t>(
      std::count_if(frames.begin(), frames.end(), [](const PitchFrame& f) { return f.voiced(); }));
}

namespace {

// Biased autocorrelation r[lag] = sum_i x[i] x[i + lag] for lag in [0, max_lag].
std::vector<double> autocorrelation(const std::vector<double>& x, std::size_t max_lag) {
  std::vector<double> r(max_lag + 1, 0.0);
  const std::size_t n = x.size();
  for (std::size_t lag = 0; lag <= max_lag && lag < n; ++lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += x[i] * x[i + lag];
    r[lag] = acc;
  }
  return r;
}

}  // namespace

PitchContour track_pitch(const Waveform& w, const PitchConfig& cfg) {
  if (!(cfg.floor_hz > 0.0) || !(cfg.floor_hz < cfg.ceil_hz)) {
    throw Error(Errc::InvalidArgument, "pitch floor must be positive and below the ceiling");
  }
  if (!(cfg.hop_s > 0.0)) throw Error(Errc::InvalidArgument, "hop must be positive");
  const double sr = w.sample_rate;
  const auto win = static_cast<std::size_t>(std::lround(3.0 / cfg.floor_hz * sr));
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.hop_s * sr)));
  if (w.samples.size() < win || win < 4) {
    throw Error(Errc::TooShort, "waveform shorter than one pitch analysis window");
  }

  const auto min_lag = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::floor(sr / cfg.ceil_hz)));
  const auto max_lag = std::min<std::size_t>(
      static_cast<std::size_t>(std::ceil(sr / cfg.floor_hz)), win / 2);
  const std::size_t search_hi = std::min(max_lag + 1, win - 1);

  std::vector<double> window(win);
  for (std::size_t i = 0; i < win; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * (static_cast<double>(i) + 0.5) / static_cast<double>(win));
  }
  const std::vector<double> window_ac = autocorrelation(window, search_hi);

  double global_peak = 0.0;
  for (double s : w.samples) global_peak = std::max(global_peak, std::abs(s));

  PitchContour contour;
  contour.hop_s = static_cast<double>(hop) / sr;
  contour.floor_hz = cfg.floor_hz;
  contour.ceil_hz = cfg.ceil_hz;

  const std::size_t n_frames = 1 + (w.samples.size() - win) / hop;
  contour.frames.reserve(n_frames);
  std::vector<double> seg(win);
  std::vector<double> r(search_hi + 1);

  for (std::size_t f = 0; f < n_frames; ++f) {
    PitchFrame frame;
    frame.time_s = (static_cast<double>(f * hop) + static_cast<double>(win) / 2.0) / sr;

    const double* src = w.samples.data() + f * hop;
    double mean = 0.0;
    double local_peak = 0.0;
    for (std::size_t i = 0; i < win; ++i) {
      mean += src[i];
      local_peak = std::max(local_peak, std::abs(src[i]));
    }
    mean /= static_cast<double>(win);

    if (global_peak == 0.0 || local_peak < cfg.silence_threshold * global_peak) {
      contour.frames.push_back(frame);
      continue;
    }

    for (std::size_t i = 0; i < win; ++i) seg[i] = (src[i] - mean) * window[i];
    const std::vector<double> ac = autocorrelation(seg, search_hi);
    if (!(ac[0] > 0.0)) {
      contour.frames.push_back(frame);
      continue;
    }
    for (std::size_t lag = 0; lag <= search_hi; ++lag) {
      r[lag] = (ac[lag] / ac[0]) / (window_ac[lag] / window_ac[0]);
    }

    double best_strength = -std::numeric_limits<double>::infinity();
    double best_peak = 0.0;
    double best_lag = 0.0;
    for (std::size_t lag = std::max<std::size_t>(min_lag, 1); lag <= max_lag && lag + 1 <= search_hi; ++lag) {
      if (!(r[lag] > r[lag - 1] && r[lag] >= r[lag + 1])) continue;
      const double left = r[lag - 1], mid = r[lag], right = r[lag + 1];
      const double denom = left - 2.0 * mid + right;
      double shift = 0.0;
      if (denom < 0.0) shift = std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
      const double peak = std::min(1.0, mid - 0.25 * (left - right) * shift);
      const double refined = static_cast<double>(lag) + shift;
      const double strength = peak - cfg.octave_cost * std::log2(cfg.floor_hz * refined / sr);
      if (strength > best_strength) {
        best_strength = strength;
        best_peak = peak;
        best_lag = refined;
      }
    }

    if (best_lag > 0.0 && best_peak >= cfg.voicing_threshold) {
      frame.f0 = std::clamp(sr / best_lag, cfg.floor_hz, cfg.ceil_hz);
    }
    contour.frames.push_back(frame);
  }
  return contour;
}

PitchStats pitch_stats(const PitchContour& c) {
  PitchStats s;
  double sum = 0.0;
  s.min_hz = std::numeric_limits<double>::infinity();
  s.max_hz = -std::numeric_limits<double>::infinity();
  for (const auto& f : c.frames) {
    if (!f.voiced()) continue;
    const double v = *f.f0;
    sum += v;
    s.min_hz = std::min(s.min_hz, v);
    s.max_hz = std::max(s.max_hz, v);
    ++s.voiced_len;
  }
  if (s.voiced_len == 0) throw Error(Errc::NoVoicedFrames, "contour has no voiced frames");
  s.mean_hz = sum / static_cast<double>(s.voiced_len);
  // Guard the ordering invariant against summation rounding.
  s.mean_hz = std::clamp(s.mean_hz, s.min_hz, s.max_hz);
  s.range_hz = s.max_hz - s.min_hz;
  return s;
}

double legendre(int order, double t) {
  switch (order) {
    case 0: return 1.0;
    case 1: return t;
    case 2: return 0.5 * (3.0 * t * t - 1.0);
    case 3: return 0.5 * (5.0 * t * t * t - 3.0 * t);
    default: break;
  }
  // Bonnet recursion for completeness.
  double p0 = 1.0, p1 = t;
  for (int n = 1; n < order; ++n) {
    const double p2 = ((2.0 * n + 1.0) * t * p1 - n * p0) / (n + 1.0);
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

LegendreCoeffs fit_legendre(const PitchContour& c) {
  std::vector<double> times;
  std::vector<double> values;
  for (const auto& f : c.frames) {
    if (!f.voiced()) continue;
    times.push_back(f.time_s);
    values.push_back(*f.f0);
  }
  if (times.size() < kMinVoicedForLegendre) {
    throw Error(Errc::TooFewVoicedFrames,
                std::to_string(times.size()) + " voiced frames, need " +
                    std::to_string(kMinVoicedForLegendre));
  }
  const double t0 = times.front();
  const double t1 = times.back();
  if (!(t1 > t0)) throw Error(Errc::InvalidArgument, "voiced frame times must increase");

  const auto n = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd basis(n, 4);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = 2.0 * (times[i] - t0) / (t1 - t0) - 1.0;
    for (int k = 0; k < 4; ++k) basis(i, k) = legendre(k, t);
    y(i) = values[i];
  }
  const Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(y);
  LegendreCoeffs out;
  for (int k = 0; k < 4; ++k) out.c[k] = coef(k);
  return out;
}

}  // namespace prosim
