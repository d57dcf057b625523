#include "doctest.h"

#include "prosim/error.hpp"
#include "prosim/rng.hpp"
#include "prosim/similarity.hpp"
#include "prosim/synthetic.hpp"

using namespace prosim;

namespace {

MelSpectrogram spec_of(const Eigen::MatrixXd& m) {
  MelSpectrogram s;
  s.frames = m;
  s.n_mels = static_cast<int>(m.cols());
  s.frame_hop_s = 0.01;
  return s;
}

MelSpectrogram random_spec(Rng& rng, int frames, int mels) {
  Eigen::MatrixXd m(frames, mels);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
  return spec_of(m);
}

template <typename F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::InvalidArgument;
}

}  // namespace

TEST_SUITE("similarity") {

TEST_CASE("scalar_similarity: negated absolute difference") {
  CHECK(scalar_similarity(200, 200) == 0.0);
  CHECK(scalar_similarity(100, 150) > scalar_similarity(100, 300));
  CHECK(scalar_similarity(100, 300) == -200.0);
  // Means 100/110/300: (100, 110) is the most similar pair.
  const double ab = scalar_similarity(100, 110), ac = scalar_similarity(100, 300),
               bc = scalar_similarity(110, 300);
  CHECK(ab > ac);
  CHECK(ab > bc);
}

TEST_CASE("cosine_similarity: examples and errors") {
  const std::vector<double> x{1, 0}, y{0, 1}, u{1, 2, 3}, v{2, 4, 6};
  CHECK(cosine_similarity(x, x) == doctest::Approx(1.0));
  CHECK(cosine_similarity(x, y) == doctest::Approx(0.0));
  CHECK(cosine_similarity(u, v) == doctest::Approx(1.0));
  const std::vector<double> zero{0, 0}, three{1, 2, 3};
  CHECK(code_of([&] { cosine_similarity(x, zero); }) == Errc::ZeroVector);
  CHECK(code_of([&] { cosine_similarity(x, three); }) == Errc::DimensionMismatch);
}

TEST_CASE("cosine_similarity: symmetric, bounded, scale invariant") {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    Eigen::VectorXd a(7), b(7);
    for (int i = 0; i < 7; ++i) {
      a(i) = rng.normal();
      b(i) = rng.normal();
    }
    const double s = cosine_similarity(a, b);
    CHECK(s == doctest::Approx(cosine_similarity(b, a)).epsilon(1e-14));
    CHECK(s <= 1.0);
    CHECK(s >= -1.0);
    CHECK(cosine_similarity(a, a) >= s);
    const double k = rng.uniform(0.01, 100.0);
    CHECK(cosine_similarity(Eigen::VectorXd(k * a), b) == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("spectrogram_similarity: identity and amplitude scaling") {
  const Waveform w = synth::to_wave(synth::sawtooth(180, 0.4, 16000), 16000);
  const MelSpectrogram a = mel_spectrogram(w);
  CHECK(spectrogram_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  Waveform half = w;
  for (double& s : half.samples) s *= 0.5;
  CHECK(spectrogram_similarity(a, mel_spectrogram(half)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("spectrogram_similarity: 1 kHz vs 4 kHz tones are dissimilar") {
  const MelSpectrogram a = mel_spectrogram(synth::to_wave(synth::sine(1000, 0.3, 16000), 16000));
  const MelSpectrogram b = mel_spectrogram(synth::to_wave(synth::sine(4000, 0.5, 16000), 16000));
  const Eigen::MatrixXd ra = resample_frames(a.frames), rb = resample_frames(b.frames);
  const double direct = (ra.array() * rb.array()).sum() / (ra.norm() * rb.norm());
  const double s = spectrogram_similarity(a, b);
  CHECK(s == doctest::Approx(direct));
  CHECK(s < 0.5);
}

TEST_CASE("spectrogram_similarity: silence throws ZeroVector") {
  const MelSpectrogram a = mel_spectrogram(synth::to_wave(synth::sine(1000, 0.3, 16000), 16000));
  const MelSpectrogram z = mel_spectrogram(synth::to_wave(std::vector<double>(4800, 0.0), 16000));
  CHECK(code_of([&] { spectrogram_similarity(a, z); }) == Errc::ZeroVector);
}

TEST_CASE("resample_frames: linear interpolation to 64 frames") {
  Eigen::MatrixXd m(2, 1);
  m << 0.0, 63.0;
  const Eigen::MatrixXd r = resample_frames(m);
  REQUIRE(r.rows() == 64);
  for (int i = 0; i < 64; ++i) CHECK(r(i, 0) == doctest::Approx(i));
  Eigen::MatrixXd one(1, 3);
  one << 1, 2, 3;
  const Eigen::MatrixXd r1 = resample_frames(one);
  CHECK(r1.rows() == 64);
  CHECK(r1(40, 2) == 3.0);
}

TEST_CASE("spectral_convergence: hand-computed values") {
  Rng rng(2);
  const MelSpectrogram a = random_spec(rng, 64, 10);
  CHECK(spectral_convergence(a, a) == 0.0);
  CHECK(spectral_convergence(a, spec_of(2.0 * a.frames)) == doctest::Approx(0.75).epsilon(1e-12));

  Eigen::MatrixXd left = Eigen::MatrixXd::Zero(64, 10), right = Eigen::MatrixXd::Zero(64, 10);
  left.leftCols(5).setConstant(2.0);
  right.rightCols(5).setConstant(2.0);
  CHECK(spectral_convergence(spec_of(left), spec_of(right)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(spectral_convergence_similarity(spec_of(left), spec_of(right)) ==
        doctest::Approx(-std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("spectral_convergence: symmetric with maximal self-similarity") {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const MelSpectrogram a = random_spec(rng, 10 + static_cast<int>(rng.below(90)), 8);
    const MelSpectrogram b = random_spec(rng, 10 + static_cast<int>(rng.below(90)), 8);
    CHECK(spectral_convergence(a, b) == doctest::Approx(spectral_convergence(b, a)).epsilon(1e-14));
    CHECK(spectral_convergence_similarity(a, a) >= spectral_convergence_similarity(a, b));
    CHECK(spectrogram_similarity(a, b) == doctest::Approx(spectrogram_similarity(b, a)).epsilon(1e-14));
  }
}

TEST_CASE("spectral_convergence: zero reference and band mismatch") {
  Rng rng(1);
  const MelSpectrogram a = random_spec(rng, 20, 8);
  const MelSpectrogram z = spec_of(Eigen::MatrixXd::Zero(20, 8));
  CHECK(code_of([&] { spectral_convergence(a, z); }) == Errc::ZeroReference);
  CHECK(code_of([&] { spectral_convergence(z, a); }) == Errc::ZeroReference);
  const MelSpectrogram c = random_spec(rng, 20, 9);
  CHECK(code_of([&] { spectral_convergence(a, c); }) == Errc::DimensionMismatch);
}

TEST_CASE("lp_combined_vector: first three coefficients") {
  LegendreCoeffs l;
  l.c = {150, 0, 0, 0};
  CHECK(lp_combined_vector(l) == Eigen::Vector3d(150, 0, 0));
  l.c = {100, 50, 0, 7};
  CHECK(lp_combined_vector(l) == Eigen::Vector3d(100, 50, 0));
  LegendreCoeffs low, high;
  low.c = {100, 0, 0, 0};
  high.c = {200, 0, 0, 0};
  CHECK(cosine_similarity(Eigen::VectorXd(lp_combined_vector(low)), Eigen::VectorXd(lp_combined_vector(high))) ==
        doctest::Approx(1.0));
}

}
