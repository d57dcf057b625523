#include "prosim/similarity.hpp"

#include "prosim/error.hpp"

#include <cmath>

namespace prosim {

double scalar_similarity(double x, double y) { return -std::abs(x - y); }

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(Errc::DimensionMismatch,
                std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw Error(Errc::ZeroVector, "cosine of a zero vector");
  const double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, -1.0, 1.0);
}

double cosine_similarity(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  return cosine_similarity(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())),
                           std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

Eigen::MatrixXd resample_frames(const Eigen::MatrixXd& m, int frames) {
  if (m.rows() < 1 || frames < 1) throw Error(Errc::InvalidArgument, "empty spectrogram");
  Eigen::MatrixXd out(frames, m.cols());
  const Eigen::Index n = m.rows();
  for (int j = 0; j < frames; ++j) {
    if (n == 1 || frames == 1) {
      out.row(j) = m.row(0);
      continue;
    }
    const double pos = static_cast<double>(j) * static_cast<double>(n - 1) / (frames - 1);
    const auto lo = static_cast<Eigen::Index>(std::floor(pos));
    const Eigen::Index hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    out.row(j) = (1.0 - frac) * m.row(lo) + frac * m.row(hi);
  }
  return out;
}

namespace {

void check_mels(const MelSpectrogram& a, const MelSpectrogram& b) {
  if (a.frames.cols() != b.frames.cols()) {
    throw Error(Errc::DimensionMismatch, "spectrograms have different mel band counts");
  }
}

}  // namespace

double spectrogram_similarity(const MelSpectrogram& a, const MelSpectrogram& b) {
  check_mels(a, b);
  const Eigen::MatrixXd ra = resample_frames(a.frames);
  const Eigen::MatrixXd rb = resample_frames(b.frames);
  return cosine_similarity(std::span<const double>(ra.data(), static_cast<std::size_t>(ra.size())),
                           std::span<const double>(rb.data(), static_cast<std::size_t>(rb.size())));
}

double spectral_convergence(const MelSpectrogram& a, const MelSpectrogram& b) {
  check_mels(a, b);
  const Eigen::MatrixXd ra = resample_frames(a.frames);
  const Eigen::MatrixXd rb = resample_frames(b.frames);
  const double na = ra.norm();
  const double nb = rb.norm();
  if (na == 0.0 || nb == 0.0) throw Error(Errc::ZeroReference, "all-zero spectrogram");
  const double diff = (ra - rb).norm();
  return 0.5 * (diff / na + diff / nb);
}

double spectral_convergence_similarity(const MelSpectrogram& a, const MelSpectrogram& b) {
  return -spectral_convergence(a, b);
}

Eigen::Vector3d lp_combined_vector(const LegendreCoeffs& l) {
  return {l.c[0], l.c[1], l.c[2]};
}

}  // namespace prosim
