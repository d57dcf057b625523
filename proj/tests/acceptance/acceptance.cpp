// Acceptance gate: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails.

#include "prosim/embedding_store.hpp"
#include "prosim/error.hpp"
#include "prosim/pitch.hpp"
#include "prosim/rng.hpp"
#include "prosim/synthetic.hpp"
#include "prosim/trainer.hpp"
#include "prosim/triad.hpp"

#include <Eigen/Dense>

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>

namespace fs = std::filesystem;
using namespace prosim;

namespace {

int g_failed = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

void criterion(const char* name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [ok, detail] = body();
    report(name, ok, detail);
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

PitchContour contour_of(const std::vector<std::optional<double>>& f0) {
  PitchContour c;
  c.floor_hz = 0.0;
  c.ceil_hz = 1e9;
  for (std::size_t i = 0; i < f0.size(); ++i) c.frames.push_back({0.01 * static_cast<double>(i), f0[i]});
  return c;
}

template <typename F>
PitchContour sampled(F f, std::size_t n) {
  std::vector<std::optional<double>> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(f(-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1)));
  return contour_of(v);
}

std::pair<bool, std::string> triplet_identities() {
  const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(1, 2);
  Eigen::MatrixXd far(1, 2), p1(1, 2), n1(1, 2);
  far << 2, 0;
  p1 << 1, 0;
  n1 << 0, 1;
  const double a = triplet_loss(z, z, z, 0.5);
  const double b = triplet_loss(z, z, far, 0.5);
  const double c = triplet_loss(z, p1, n1, 0.5);
  const double err = std::max({std::abs(a - 0.5), std::abs(b), std::abs(c - 0.5)});
  return {err <= 1e-9, fmt("identical 0.5, satisfied 0, equidistant 0.5; max error %.1e", err)};
}

std::pair<bool, std::string> gradient_check() {
  Rng rng(101);
  int instances = 0;
  double worst = 0.0;
  while (instances < 100) {
    const auto rows = static_cast<Eigen::Index>(1 + rng.below(6));
    const auto in = static_cast<Eigen::Index>(2 + rng.below(5));
    const auto out = static_cast<Eigen::Index>(1 + rng.below(4));
    const TripletBatch b{random_matrix(rng, rows, in), random_matrix(rng, rows, in), random_matrix(rng, rows, in)};
    const Eigen::MatrixXd w = random_matrix(rng, out, in);
    const Eigen::MatrixXd la = b.anchor * w.transpose(), lp = b.positive * w.transpose(), ln = b.negative * w.transpose();
    bool near_kink = false;
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double dp = (la.row(i) - lp.row(i)).norm(), dn = (la.row(i) - ln.row(i)).norm();
      if (std::abs(dp - dn + 0.5) < 1e-2 || dp < 1e-3 || dn < 1e-3) near_kink = true;
    }
    if (near_kink) continue;
    ++instances;
    const auto lg = projected_triplet_loss(w, b, 0.5);
    Eigen::MatrixXd numeric(out, in);
    const double h = 1e-6;
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) {
        Eigen::MatrixXd wp = w, wm = w;
        wp(r, c) += h;
        wm(r, c) -= h;
        numeric(r, c) = (projected_triplet_loss(wp, b, 0.5).loss - projected_triplet_loss(wm, b, 0.5).loss) / (2 * h);
      }
    }
    worst = std::max(worst, (lg.grad - numeric).norm() / std::max(numeric.norm(), 1e-8));
  }
  return {worst <= 1e-4, fmt("100 instances, worst relative error %.2e", worst)};
}

std::pair<bool, std::string> legendre_recovery() {
  double err = 0.0;
  auto check = [&](const PitchContour& c, std::array<double, 4> want) {
    const auto got = fit_legendre(c);
    for (int k = 0; k < 4; ++k) err = std::max(err, std::abs(got.c[k] - want[k]));
  };
  check(sampled([](double) { return 150.0; }, 40), {150, 0, 0, 0});
  check(sampled([](double t) { return 100.0 + 50.0 * t; }, 40), {100, 50, 0, 0});
  const auto t2 = fit_legendre(sampled([](double t) { return t * t; }, 40));
  const double t2_err = std::max({std::abs(t2.c[0] - 1.0 / 3.0), std::abs(t2.c[1]), std::abs(t2.c[2] - 2.0 / 3.0),
                                  std::abs(t2.c[3])});
  err = std::max(err, t2_err);

  Rng rng(7);
  int parity_fail = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::optional<double>> f0;
    const auto n = 5 + rng.below(60);
    for (std::size_t i = 0; i < n; ++i) f0.push_back(rng.bernoulli(0.2) ? std::nullopt : std::optional(rng.uniform(80, 400)));
    f0.front() = rng.uniform(80, 400);
    f0.back() = rng.uniform(80, 400);
    std::size_t voiced = 0;
    for (const auto& v : f0) voiced += v.has_value();
    if (voiced < kMinVoicedForLegendre) continue;
    const auto fwd = fit_legendre(contour_of(f0));
    std::reverse(f0.begin(), f0.end());
    const auto rev = fit_legendre(contour_of(f0));
    for (int k = 0; k < 4; ++k) {
      const double sign = k % 2 == 0 ? 1.0 : -1.0;
      if (std::abs(rev.c[k] - sign * fwd.c[k]) > 1e-6 * std::max(1.0, std::abs(fwd.c[k]))) {
        ++parity_fail;
        break;
      }
    }
  }
  return {err <= 1e-6 && parity_fail == 0,
          fmt("max coefficient error %.1e; parity failures %d of 1000", err, parity_fail)};
}

std::pair<bool, std::string> pitch_tracking() {
  const int rate = 16000;
  const double dur = 0.5;
  const auto n = static_cast<std::size_t>(dur * rate);
  const auto win = static_cast<std::size_t>(std::lround(3.0 / 75.0 * rate));
  const auto hop = static_cast<std::size_t>(std::lround(0.01 * rate));
  const double frames = static_cast<double>(1 + (n - win) / hop);
  double worst_hz = 0.0, worst_len = 0.0;
  for (double f0 : {120.0, 200.0, 350.0}) {
    for (bool saw : {false, true}) {
      const auto s = saw ? synth::sawtooth(f0, dur, rate) : synth::sine(f0, dur, rate);
      const auto st = pitch_stats(track_pitch(synth::to_wave(s, rate)));
      worst_hz = std::max(worst_hz, std::abs(st.mean_hz - f0));
      worst_len = std::max(worst_len, std::abs(static_cast<double>(st.voiced_len) - frames));
    }
  }
  auto unvoiced_frac = [&](const std::vector<double>& x) {
    const auto c = track_pitch(synth::to_wave(x, rate));
    return 1.0 - static_cast<double>(c.voiced_count()) / static_cast<double>(c.frames.size());
  };
  const double silence = unvoiced_frac(std::vector<double>(n, 0.0));
  const double noise = unvoiced_frac(synth::white_noise(dur, rate, 17));
  const bool ok = worst_hz <= 2.0 && worst_len <= 3.0 && silence >= 0.9 && noise >= 0.9;
  return {ok, fmt("worst mean error %.3f Hz, voiced_len off by %.0f; unvoiced silence %.0f%%, noise %.0f%%", worst_hz,
                  worst_len, 100 * silence, 100 * noise)};
}

std::pair<bool, std::string> agreement_protocol() {
  const auto c = synth::random_consensus(10000, 17);
  const TriadScorer oracle = [](const ConsensusTriad& t) -> std::optional<TriadScores> {
    TriadScores s{0, 0, 0};
    s[static_cast<int>(t.consensus_pair)] = 1;
    return s;
  };
  const double o = evaluate_agreement(c, oracle).percent;
  Rng rng(2024);
  std::map<std::string, TriadScores> fixed;
  for (const auto& t : c) fixed[t.triad.triad_id] = {rng.uniform(), rng.uniform(), rng.uniform()};
  const double r = evaluate_agreement(c, [&](const ConsensusTriad& t) -> std::optional<TriadScores> {
                     return fixed.at(t.triad.triad_id);
                   }).percent;

  // Relabel clips of 1000 triads; scores follow the clips, so hits must not change.
  std::map<std::string, double> feature;
  for (const auto& t : c) for (const auto& id : t.triad.clips) feature[id] = rng.normal();
  const TriadScorer by_feature = pairwise([&](const std::string& a, const std::string& b) -> std::optional<double> {
    return -std::abs(feature.at(a) - feature.at(b));
  });
  int mismatches = 0;
  for (std::size_t k = 0; k < 1000; ++k) {
    const auto& t = c[k];
    std::array<int, 3> perm{0, 1, 2};
    for (int i = 2; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    ConsensusTriad u = t;
    for (int i = 0; i < 3; ++i) u.triad.clips[i] = t.triad.clips[perm[i]];
    const auto m = pair_members(t.consensus_pair);
    int ni = 0, nj = 0;
    for (int i = 0; i < 3; ++i) {
      if (perm[i] == m[0]) ni = i;
      if (perm[i] == m[1]) nj = i;
    }
    u.consensus_pair = pair_of(ni, nj);
    if (evaluate_agreement({t}, by_feature).hits != evaluate_agreement({u}, by_feature).hits) ++mismatches;
  }
  const bool ok = o == 100.0 && std::abs(r - 100.0 / 3.0) <= 1.5 && mismatches == 0;
  return {ok, fmt("oracle %.2f%%, random %.2f%% over 10000, relabel mismatches %d of 1000", o, r, mismatches)};
}

std::pair<bool, std::string> end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  synth::LatentConfig lc;
  lc.n_triads = 6000;
  const auto data = synth::make_latent_dataset(lc);
  TrainConfig cfg;
  cfg.latent_dims = {8, 16, 64};
  cfg.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  cfg.input = InputSpec::parse("embedding:synth:0");
  const auto r = run_protocol(data.consensus, data.features, cfg);
  std::map<int, double> mean;
  for (const auto& rep : r.reports) mean[rep.latent_dim] += rep.test_agreement / cfg.folds;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double raw = r.raw_holdout.percent;
  const bool ok = mean[8] >= 85.0 && mean[8] - raw >= 10.0 && std::abs(mean[16] - mean[64]) <= 5.0 && secs <= 300.0;
  return {ok, fmt("%zu consensus triads; dim8 %.2f%%, raw %.2f%%, dim16 %.2f%%, dim64 %.2f%%; %.0f s",
                  data.consensus.size(), mean[8], raw, mean[16], mean[64], secs)};
}

std::pair<bool, std::string> layer_probe() {
  synth::LatentConfig lc;
  lc.n_clips = 200;
  lc.n_triads = 1200;
  const auto data = synth::make_latent_dataset(lc);
  const auto stacks = synth::planted_stacks(data, "probe", 25, 64, 12, 5);
  const auto curve = probe_layers(data.consensus, stacks, "probe");
  std::size_t best = 0;
  for (std::size_t l = 1; l < curve.size(); ++l) {
    if (curve[l].percent > curve[best].percent) best = l;
  }
  double runner_up = 0.0;
  for (std::size_t l = 0; l < curve.size(); ++l) {
    if (l != best) runner_up = std::max(runner_up, curve[l].percent);
  }
  return {curve.size() == 25 && best == 12,
          fmt("%zu points, peak at layer %zu (%.2f%%, next best %.2f%%)", curve.size(), best, curve[best].percent,
              runner_up)};
}

std::pair<bool, std::string> protocol_arithmetic() {
  synth::LatentConfig lc;
  lc.n_clips = 150;
  lc.dim = 8;
  lc.n_triads = 500;
  auto data = synth::make_latent_dataset(lc);
  if (data.consensus.size() < 100) return {false, "synthetic set too small"};
  data.consensus.resize(100);
  TrainConfig cfg;
  cfg.latent_dims = {4};
  cfg.epochs = 30;
  cfg.jobs = 5;
  cfg.input = InputSpec::parse("embedding:synth:0");
  const auto a = run_protocol(data.consensus, data.features, cfg);
  bool shape = a.reports.size() == 5;
  for (const auto& r : a.reports) shape = shape && r.n_test == 20 && r.n_train == 64 && r.n_val == 16;

  const auto split = split_protocol(100, 5, 0.2, cfg.seed);
  auto permuted = data.consensus;
  Rng rng(3);
  for (auto i : split.holdout) permuted[i].consensus_pair = static_cast<Pair>(rng.below(3));
  const auto b = run_protocol(permuted, data.features, cfg);
  bool same = a.models.size() == b.models.size();
  for (std::size_t k = 0; same && k < a.models.size(); ++k) same = a.models[k].weights == b.models[k].weights;
  return {shape && same, fmt("%zu folds of 64/16 with holdout 20: %s; holdout relabel changes weights: %s",
                             a.reports.size(), shape ? "yes" : "no", same ? "no" : "yes")};
}

std::pair<bool, std::string> pemb_round_trip() {
  Rng rng(55);
  int mismatches = 0;
  const fs::path dir = fs::temp_directory_path() / ("prosim-accept-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  for (int k = 0; k < 1000; ++k) {
    EmbeddingStack s;
    s.clip_id = "c" + std::to_string(k);
    s.model_name = "m";
    s.n_layers = static_cast<std::uint32_t>(1 + rng.below(25));
    s.dim = static_cast<std::uint32_t>(1 + rng.below(64));
    s.vectors.resize(std::size_t{s.n_layers} * s.dim);
    for (auto& v : s.vectors) v = static_cast<float>(rng.normal() * std::pow(10.0, rng.uniform(-6, 6)));
    const auto path = dir / stack_filename(s.clip_id, s.model_name);
    write_stack(s, path);
    const auto r = read_stack(path);
    if (r.n_layers != s.n_layers || r.dim != s.dim || r.clip_id != s.clip_id ||
        std::memcmp(r.vectors.data(), s.vectors.data(), s.vectors.size() * sizeof(float)) != 0) {
      ++mismatches;
    }
  }
  fs::remove_all(dir);

  EmbeddingStack s;
  s.n_layers = 2;
  s.dim = 3;
  s.vectors.assign(6, 1.0f);
  const auto good = encode_stack(s);
  auto expect = [&](std::vector<unsigned char> bytes, Errc want) {
    try {
      decode_stack(bytes);
    } catch (const Error& e) {
      return e.code() == want;
    }
    return false;
  };
  auto magic = good, version = good, cut = good;
  magic[0] = 'X';
  version[4] = 9;
  cut.pop_back();
  const bool malformed = expect(magic, Errc::BadMagic) && expect(version, Errc::VersionMismatch) &&
                         expect(cut, Errc::Truncated) && expect({'P', 'E'}, Errc::Truncated);
  return {mismatches == 0 && malformed,
          fmt("1000 stacks, %d mismatches; malformed files rejected with the right code: %s", mismatches,
              malformed ? "yes" : "no")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::pair<bool, std::string> pinned_report() {
  const fs::path mini = fs::path(PROSIM_TEST_DATA) / "mini";
  const fs::path out = fs::temp_directory_path() / ("prosim-pin-" + std::to_string(::getpid()));
  bool identical = true;
  for (const char* jobs : {"1", "4"}) {
    const std::string cmd = std::string(PROSIM_CLI) + " --jobs " + jobs + " eval --consensus '" +
                            (mini / "consensus.jsonl").string() + "' --features '" + (mini / "features.jsonl").string() +
                            "' --manifest '" + (mini / "manifest.jsonl").string() + "' --oracle --random --out-dir '" +
                            out.string() + "' >/dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      fs::remove_all(out);
      return {false, "prosim eval failed"};
    }
    for (const char* f : {"report.csv", "report.txt"}) {
      identical = identical && slurp(out / f) == slurp(mini / "expected" / f) && !slurp(out / f).empty();
    }
  }
  fs::remove_all(out);
  return {identical, identical ? "report.csv and report.txt match expected/ (jobs 1 and 4)" : "output differs from expected/"};
}

}  // namespace

int main() {
  criterion("triplet-loss identities", triplet_identities);
  criterion("gradient correctness", gradient_check);
  criterion("legendre recovery", legendre_recovery);
  criterion("pitch tracking", pitch_tracking);
  criterion("agreement protocol", agreement_protocol);
  criterion("synthetic end-to-end", end_to_end);
  criterion("layer-probe curve shape", layer_probe);
  criterion("protocol arithmetic", protocol_arithmetic);
  criterion("pemb round trip", pemb_round_trip);
  criterion("table/report fidelity", pinned_report);
  std::printf("%d failed\n", g_failed);
  return g_failed == 0 ? 0 : 1;
}
