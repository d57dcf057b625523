// Regenerates the frozen miniature dataset under tests/data/mini.
//
//   make_fixture <out_dir>
//
// The output is committed; tests read it and never call this program. Run it
// only when the fixture itself must change, then re-pin expected/ with
// `prosim eval` (see tests/CMakeLists.txt).

#include "prosim/audio.hpp"
#include "prosim/embedding_store.hpp"
#include "prosim/manifest.hpp"
#include "prosim/rng.hpp"
#include "prosim/synthetic.hpp"
#include "prosim/triad.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace prosim;

namespace {

struct ClipSpec {
  const char* id;
  const char* dataset;
  const char* form;
  const char* speaker;
  double base_hz;
  double slope_hz;  // total rise over the clip
  double dur_s;
};

// Two prosodic families per form: rising short, falling long, and a flat
// middle ground. The last clip is breathy noise with no pitch.
const ClipSpec kClips[] = {
    {"fica-yeah-01", "FiCa", "yeah", "f01", 180, 80, 0.30},
    {"fica-yeah-02", "FiCa", "yeah", "f02", 200, 90, 0.28},
    {"fica-yeah-03", "FiCa", "yeah", "m01", 120, 60, 0.32},
    {"fica-yeah-04", "FiCa", "yeah", "f01", 210, -70, 0.55},
    {"fica-yeah-05", "FiCa", "yeah", "m02", 130, -50, 0.60},
    {"fica-yeah-06", "FiCa", "yeah", "f03", 190, -60, 0.52},
    {"fica-yeah-07", "FiCa", "yeah", "m01", 125, 0, 0.42},
    {"fisher-mhm-01", "Fisher", "mhm", "a", 110, 30, 0.35},
    {"fisher-mhm-02", "Fisher", "mhm", "b", 190, 40, 0.33},
    {"fisher-mhm-03", "Fisher", "mhm", "c", 115, -40, 0.62},
    {"fisher-mhm-04", "Fisher", "mhm", "d", 200, -55, 0.58},
    {"fisher-mhm-05", "Fisher", "mhm", "a", 105, 35, 0.37},
    {"fisher-mhm-06", "Fisher", "mhm", "e", 180, 0, 0.45},
    {"fisher-mhm-07", "Fisher", "mhm", "b", 0, 0, 0.40},
};

constexpr int kRate = 16000;
constexpr std::uint64_t kSeed = 17;

std::vector<double> render(const ClipSpec& c, std::uint64_t seed) {
  if (c.base_hz <= 0.0) return synth::white_noise(c.dur_s, kRate, seed, 0.3);
  const double base = c.base_hz, slope = c.slope_hz;
  return synth::voiced_contour([=](double u) { return base + slope * u; }, c.dur_s, kRate);
}

// Perceptual coordinates the scripted raters use: direction of the glide
// and length, both on comparable scales.
std::array<double, 2> percept(const ClipSpec& c) {
  return {c.slope_hz / 60.0, (c.dur_s - 0.45) / 0.12};
}

void write_conversation(const fs::path& dir) {
  // conv01: stereo, two speakers, interval-table alignment.
  const int rate = 8000;
  const double len = 6.0;
  std::vector<std::vector<double>> ch(2, std::vector<double>(static_cast<std::size_t>(len * rate), 0.0));
  auto place = [&](int channel, double start, double end, double hz, double slope) {
    const auto s = synth::voiced_contour([=](double u) { return hz + slope * u; }, end - start, rate);
    const auto off = static_cast<std::size_t>(std::lround(start * rate));
    for (std::size_t i = 0; i < s.size() && off + i < ch[channel].size(); ++i) ch[channel][off + i] = s[i];
  };
  place(0, 1.00, 1.35, 190, 60);  // isolated "yeah"
  place(0, 2.80, 3.05, 180, 0);   // "yeah" followed by speech
  place(0, 3.10, 3.60, 170, -20);
  place(1, 4.00, 4.40, 110, -20);  // isolated "mhm"
  write_wav(dir / "audio" / "conv01.wav", ch, rate);
  std::ofstream(dir / "alignments" / "conv01.txt")
      << "# speaker start end word channel\n"
         "A 1.00 1.35 Yeah 0\n"
         "A 2.80 3.05 yeah 0\n"
         "A 3.10 3.30 I 0\n"
         "A 3.30 3.60 know 0\n"
         "B 4.00 4.40 mm-hmm 1\n"
         "B 5.00 5.00 uh 1\n";

  // conv02: mono, TextGrid alignment.
  std::vector<std::vector<double>> mono(1, std::vector<double>(static_cast<std::size_t>(4.0 * rate), 0.0));
  const auto s = synth::voiced_contour([](double u) { return 150 + 40 * u; }, 0.4, rate);
  for (std::size_t i = 0; i < s.size(); ++i) mono[0][static_cast<std::size_t>(1.5 * rate) + i] = s[i];
  write_wav(dir / "audio" / "conv02.wav", mono, rate);
  std::ofstream(dir / "alignments" / "conv02.TextGrid")
      << "File type = \"ooTextFile\"\n"
         "Object class = \"TextGrid\"\n\n"
         "xmin = 0\nxmax = 4\ntiers? <exists>\nsize = 2\nitem []:\n"
         "    item [1]:\n        class = \"IntervalTier\"\n        name = \"C - words\"\n"
         "        xmin = 0\n        xmax = 4\n        intervals: size = 3\n"
         "        intervals [1]:\n            xmin = 0\n            xmax = 1.5\n            text = \"\"\n"
         "        intervals [2]:\n            xmin = 1.5\n            xmax = 1.9\n            text = \"wow\"\n"
         "        intervals [3]:\n            xmin = 1.9\n            xmax = 4\n            text = \"\"\n"
         "    item [2]:\n        class = \"IntervalTier\"\n        name = \"C - phones\"\n"
         "        xmin = 0\n        xmax = 4\n        intervals: size = 1\n"
         "        intervals [1]:\n            xmin = 0\n            xmax = 4\n            text = \"\"\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixture <out_dir>\n";
    return 2;
  }
  const fs::path out(argv[1]);
  for (const char* sub : {"clips", "emb", "audio", "alignments"}) fs::create_directories(out / sub);

  Rng rng(kSeed);
  Manifest manifest;
  std::map<std::string, const ClipSpec*> spec_of;
  const std::size_t n_layers = 5, dim = 16;
  Eigen::MatrixXd mix(dim, 2);
  for (Eigen::Index i = 0; i < mix.size(); ++i) mix.data()[i] = rng.normal();

  for (const auto& c : kClips) {
    spec_of[c.id] = &c;
    const auto wav = fs::path("clips") / (std::string(c.id) + ".wav");
    write_wav(out / wav, {render(c, derive_seed(kSeed, manifest.clips.size()))}, kRate);

    EmbeddingStack s;
    s.clip_id = c.id;
    s.model_name = "stub";
    s.n_layers = n_layers;
    s.dim = dim;
    const auto p = percept(c);
    const Eigen::VectorXd planted = mix * Eigen::Vector2d(p[0], p[1]) + Eigen::VectorXd::Constant(dim, 3.0);
    for (std::size_t l = 0; l < n_layers; ++l) {
      const double signal = l == 3 ? 1.0 : 0.2 * static_cast<double>(l);
      for (std::size_t k = 0; k < dim; ++k) {
        s.vectors.push_back(static_cast<float>(signal * planted(static_cast<Eigen::Index>(k)) + rng.normal()));
      }
    }
    const auto emb = fs::path("emb") / stack_filename(c.id, "stub");
    write_stack(s, out / emb);

    ClipRecord r;
    r.clip_id = c.id;
    r.dataset = c.dataset;
    r.lexical_form = c.form;
    r.speaker_id = c.speaker;
    r.wav_path = wav.generic_string();
    r.duration_s = c.dur_s;
    r.emb_paths["stub"] = emb.generic_string();
    manifest.clips.push_back(std::move(r));
  }
  write_manifest(manifest, out / "manifest.jsonl");

  const auto triads = sample_triads(manifest, 20, kSeed);
  write_triads(triads, out / "triads.jsonl");

  // Three scripted raters; rater r2 is noisier, so some triads lose unanimity.
  std::vector<Judgment> judgments;
  const char* raters[] = {"r0", "r1", "r2"};
  const double noise[] = {0.1, 0.1, 0.6};
  for (const auto& t : triads) {
    for (int r = 0; r < 3; ++r) {
      Pair best = Pair::AB;
      double best_d = 1e300;
      for (Pair p : {Pair::AB, Pair::AC, Pair::BC}) {
        const auto m = pair_members(p);
        const auto a = percept(*spec_of.at(t.clips[m[0]])), b = percept(*spec_of.at(t.clips[m[1]]));
        const double d = std::hypot(a[0] - b[0], a[1] - b[1]) + noise[r] * rng.normal();
        if (d < best_d) {
          best_d = d;
          best = p;
        }
      }
      judgments.push_back({t.triad_id, raters[r], best, false, "2024-01-01T00:00:00Z"});
    }
  }
  write_judgments(judgments, out / "judgments.jsonl");
  write_consensus(consensus_filter(triads, judgments), out / "consensus.jsonl");

  write_conversation(out);
  std::cout << manifest.clips.size() << " clips, " << triads.size() << " triads\n";
  return 0;
}
