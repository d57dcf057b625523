#pragma once

#include "prosim/pitch.hpp"

#include <Eigen/Dense>

#include <unistd.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("prosim-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

// Frequency (Hz) of the largest-magnitude bin of a direct O(n^2) DFT.
inline double dft_peak_hz(const std::vector<double>& x, int rate) {
  const std::size_t n = x.size();
  double best = -1.0;
  std::size_t best_k = 0;
  for (std::size_t k = 1; k < n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += x[i] * std::polar(1.0, -2.0 * M_PI * static_cast<double>(k * i % n) / static_cast<double>(n));
    }
    if (std::abs(acc) > best) {
      best = std::abs(acc);
      best_k = k;
    }
  }
  return static_cast<double>(best_k) * rate / static_cast<double>(n);
}

// Legendre polynomials written out explicitly, independent of the library.
inline double p_k(int k, double t) {
  switch (k) {
    case 0: return 1.0;
    case 1: return t;
    case 2: return 0.5 * (3 * t * t - 1);
    default: return 0.5 * (5 * t * t * t - 3 * t);
  }
}

// Least-squares Legendre coefficients by solving the normal equations.
inline Eigen::Vector4d normal_equation_fit(const std::vector<double>& t, const std::vector<double>& y) {
  Eigen::Matrix4d ata = Eigen::Matrix4d::Zero();
  Eigen::Vector4d aty = Eigen::Vector4d::Zero();
  for (std::size_t i = 0; i < t.size(); ++i) {
    Eigen::Vector4d row;
    for (int k = 0; k < 4; ++k) row(k) = p_k(k, t[i]);
    ata += row * row.transpose();
    aty += row * y[i];
  }
  return ata.ldlt().solve(aty);
}

// Contour with the given f0 values at hop-spaced times (nullopt = unvoiced).
inline prosim::PitchContour contour_of(const std::vector<std::optional<double>>& f0, double hop = 0.01) {
  prosim::PitchContour c;
  c.hop_s = hop;
  c.floor_hz = 0.0;
  c.ceil_hz = 1e9;
  for (std::size_t i = 0; i < f0.size(); ++i) c.frames.push_back({0.1 + hop * static_cast<double>(i), f0[i]});
  return c;
}

// Voiced contour sampling f(t) at n uniformly spaced normalized times.
template <typename F>
prosim::PitchContour contour_from(F f, std::size_t n) {
  std::vector<std::optional<double>> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(f(-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1)));
  return contour_of(v);
}

}  // namespace testing
