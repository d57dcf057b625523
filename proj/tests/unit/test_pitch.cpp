#include "doctest.h"
#include "helpers.hpp"

#include "prosim/error.hpp"
#include "prosim/pitch.hpp"
#include "prosim/rng.hpp"
#include "prosim/synthetic.hpp"

#include <algorithm>

using namespace prosim;
using testing::contour_from;
using testing::contour_of;

namespace {

// Frames whose whole analysis window lies inside n samples.
std::size_t window_frames(std::size_t n, int rate, double floor_hz = 75.0, double hop_s = 0.01) {
  const auto win = static_cast<std::size_t>(std::lround(3.0 / floor_hz * rate));
  const auto hop = static_cast<std::size_t>(std::lround(hop_s * rate));
  return n < win ? 0 : 1 + (n - win) / hop;
}

}  // namespace

TEST_SUITE("pitch") {

TEST_CASE("track_pitch: 200 Hz sine is voiced at 200 Hz") {
  const Waveform w = synth::to_wave(synth::sine(200, 1.0, 16000), 16000);
  const PitchContour c = track_pitch(w);
  REQUIRE(c.frames.size() == window_frames(16000, 16000));
  for (std::size_t i = 1; i + 1 < c.frames.size(); ++i) {
    REQUIRE(c.frames[i].voiced());
    CHECK(*c.frames[i].f0 == doctest::Approx(200.0).epsilon(0.01));
  }
}

TEST_CASE("track_pitch: frame times step by the hop") {
  const PitchContour c = track_pitch(synth::to_wave(synth::sine(150, 0.5, 16000), 16000));
  for (std::size_t i = 1; i < c.frames.size(); ++i) {
    CHECK(c.frames[i].time_s - c.frames[i - 1].time_s == doctest::Approx(0.01));
  }
}

TEST_CASE("track_pitch: seeded white noise is mostly unvoiced") {
  const PitchContour c = track_pitch(synth::to_wave(synth::white_noise(1.0, 16000, 1234), 16000));
  const double unvoiced = 1.0 - static_cast<double>(c.voiced_count()) / static_cast<double>(c.frames.size());
  CHECK(unvoiced >= 0.9);
}

TEST_CASE("track_pitch: silence is unvoiced everywhere") {
  const PitchContour c = track_pitch(synth::to_wave(std::vector<double>(8000, 0.0), 16000));
  CHECK(!c.frames.empty());
  CHECK(c.voiced_count() == 0);
}

TEST_CASE("track_pitch: voiced f0 stays inside [floor, ceiling]") {
  PitchConfig cfg;
  cfg.floor_hz = 100;
  cfg.ceil_hz = 300;
  for (double hz : {90.0, 150.0, 290.0, 320.0}) {
    const PitchContour c = track_pitch(synth::to_wave(synth::sawtooth(hz, 0.4, 16000), 16000), cfg);
    for (const auto& f : c.frames) {
      if (f.voiced()) {
        CHECK(*f.f0 >= 100.0);
        CHECK(*f.f0 <= 300.0);
      }
    }
  }
}

TEST_CASE("track_pitch: shorter than 3/floor seconds throws TooShort") {
  try {
    track_pitch(synth::to_wave(synth::sine(200, 0.03, 16000), 16000));
    FAIL("expected TooShort");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TooShort);
  }
}

TEST_CASE("pitch_stats: direct arithmetic") {
  const PitchStats s = pitch_stats(contour_of({100.0, std::nullopt, 200.0, 300.0}));
  CHECK(s.mean_hz == 200.0);
  CHECK(s.min_hz == 100.0);
  CHECK(s.max_hz == 300.0);
  CHECK(s.range_hz == 200.0);
  CHECK(s.voiced_len == 3);

  const PitchStats one = pitch_stats(contour_of({std::nullopt, 150.0}));
  CHECK(one.mean_hz == 150.0);
  CHECK(one.min_hz == 150.0);
  CHECK(one.max_hz == 150.0);
  CHECK(one.range_hz == 0.0);
  CHECK(one.voiced_len == 1);
}

TEST_CASE("pitch_stats: no voiced frames throws NoVoicedFrames") {
  try {
    pitch_stats(contour_of({std::nullopt, std::nullopt}));
    FAIL("expected NoVoicedFrames");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoVoicedFrames);
  }
}

TEST_CASE("pitch_stats: 200 Hz sine voiced length matches the frame-count oracle") {
  const PitchStats s = pitch_stats(track_pitch(synth::to_wave(synth::sine(200, 1.0, 16000), 16000)));
  const auto expected = static_cast<double>(window_frames(16000, 16000));
  CHECK(std::abs(static_cast<double>(s.voiced_len) - expected) <= 3.0);
  CHECK(s.mean_hz == doctest::Approx(200.0).epsilon(0.01));
}

TEST_CASE("pitch_stats: invariant under shuffling voiced frames") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::optional<double>> f0;
    for (int i = 0; i < 30; ++i) {
      if (rng.bernoulli(0.3)) f0.push_back(std::nullopt);
      else f0.push_back(rng.uniform(80, 400));
    }
    f0.push_back(123.0);
    const PitchStats a = pitch_stats(contour_of(f0));
    rng.shuffle(f0);
    const PitchStats b = pitch_stats(contour_of(f0));
    CHECK(a.mean_hz == doctest::Approx(b.mean_hz).epsilon(1e-12));
    CHECK(a.min_hz == b.min_hz);
    CHECK(a.max_hz == b.max_hz);
    CHECK(a.range_hz == b.range_hz);
    CHECK(a.voiced_len == b.voiced_len);
    CHECK(a.min_hz <= a.mean_hz);
    CHECK(a.mean_hz <= a.max_hz);
  }
}

TEST_CASE("legendre: matches the explicit polynomials") {
  for (double t = -1.0; t <= 1.0; t += 0.125) {
    for (int k = 0; k < 4; ++k) CHECK(legendre(k, t) == doctest::Approx(testing::p_k(k, t)));
  }
}

TEST_CASE("fit_legendre: known coefficient vectors") {
  const LegendreCoeffs flat = fit_legendre(contour_from([](double) { return 150.0; }, 40));
  CHECK(flat.c[0] == doctest::Approx(150.0).epsilon(1e-9));
  for (int k = 1; k < 4; ++k) CHECK(std::abs(flat.c[k]) < 1e-6);

  const LegendreCoeffs line = fit_legendre(contour_from([](double t) { return 100.0 + 50.0 * t; }, 40));
  CHECK(std::abs(line.c[0] - 100.0) < 1e-6);
  CHECK(std::abs(line.c[1] - 50.0) < 1e-6);
  CHECK(std::abs(line.c[2]) < 1e-6);
  CHECK(std::abs(line.c[3]) < 1e-6);

  const LegendreCoeffs sq = fit_legendre(contour_from([](double t) { return t * t; }, 40));
  CHECK(std::abs(sq.c[0] - 1.0 / 3.0) < 1e-6);
  CHECK(std::abs(sq.c[1]) < 1e-6);
  CHECK(std::abs(sq.c[2] - 2.0 / 3.0) < 1e-6);
  CHECK(std::abs(sq.c[3]) < 1e-6);
  CHECK(sq.height() == sq.c[0]);
  CHECK(sq.slope() == sq.c[1]);
  CHECK(sq.convexity() == sq.c[2]);
}

TEST_CASE("fit_legendre: agrees with the normal-equations oracle on noisy contours with gaps") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::optional<double>> f0;
    const std::size_t n = 8 + rng.below(60);
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && i + 1 < n && rng.bernoulli(0.25)) f0.push_back(std::nullopt);
      else f0.push_back(rng.uniform(80, 300));
    }
    const PitchContour c = contour_of(f0);
    std::vector<double> t, y;
    const double t0 = c.frames.front().time_s, t1 = c.frames.back().time_s;
    for (const auto& f : c.frames) {
      if (!f.voiced()) continue;
      t.push_back(2.0 * (f.time_s - t0) / (t1 - t0) - 1.0);
      y.push_back(*f.f0);
    }
    const Eigen::Vector4d oracle = testing::normal_equation_fit(t, y);
    const LegendreCoeffs got = fit_legendre(c);
    for (int k = 0; k < 4; ++k) CHECK(got.c[k] == doctest::Approx(oracle(k)).epsilon(1e-8));
  }
}

TEST_CASE("fit_legendre: exact for cubic contours") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::array<double, 4> c{};
    for (auto& v : c) v = rng.uniform(-100, 100);
    auto f = [&](double t) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += c[k] * testing::p_k(k, t);
      return s;
    };
    const PitchContour contour = contour_from(f, 5 + rng.below(50));
    const LegendreCoeffs got = fit_legendre(contour);
    double resid = 0.0, norm = 0.0;
    for (const auto& fr : contour.frames) {
      const double t = -1.0 + 2.0 * (fr.time_s - contour.frames.front().time_s) /
                                  (contour.frames.back().time_s - contour.frames.front().time_s);
      double fit = 0.0;
      for (int k = 0; k < 4; ++k) fit += got.c[k] * testing::p_k(k, t);
      resid += (fit - *fr.f0) * (fit - *fr.f0);
      norm += *fr.f0 * *fr.f0;
    }
    CHECK(std::sqrt(resid) < 1e-6 * std::sqrt(norm));
  }
}

TEST_CASE("fit_legendre: constant shift moves c0 only") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::optional<double>> f0;
    for (int i = 0; i < 25; ++i) f0.push_back(rng.uniform(100, 200));
    const double k = rng.uniform(-50, 50);
    auto shifted = f0;
    for (auto& v : shifted) *v += k;
    const LegendreCoeffs a = fit_legendre(contour_of(f0)), b = fit_legendre(contour_of(shifted));
    CHECK(b.c[0] - a.c[0] == doctest::Approx(k).epsilon(1e-9));
    for (int j = 1; j < 4; ++j) CHECK(std::abs(b.c[j] - a.c[j]) < 1e-9);
  }
}

TEST_CASE("fit_legendre: time reversal negates odd coefficients") {
  Rng rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::optional<double>> f0;
    const std::size_t n = 4 + rng.below(80);
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && i + 1 < n && rng.bernoulli(0.2)) f0.push_back(std::nullopt);
      else f0.push_back(rng.uniform(75, 600));
    }
    if (std::count_if(f0.begin(), f0.end(), [](const auto& v) { return v.has_value(); }) < 4) continue;
    auto rev = f0;
    std::reverse(rev.begin(), rev.end());
    const LegendreCoeffs a = fit_legendre(contour_of(f0)), b = fit_legendre(contour_of(rev));
    const double tol = 1e-7 * (1.0 + std::abs(a.c[0]));
    CHECK(std::abs(b.c[0] - a.c[0]) < tol);
    CHECK(std::abs(b.c[1] + a.c[1]) < tol);
    CHECK(std::abs(b.c[2] - a.c[2]) < tol);
    CHECK(std::abs(b.c[3] + a.c[3]) < tol);
  }
}

TEST_CASE("fit_legendre: fewer than four voiced frames throws") {
  try {
    fit_legendre(contour_of({100.0, std::nullopt, 110.0, 120.0}));
    FAIL("expected TooFewVoicedFrames");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TooFewVoicedFrames);
  }
}

}
