#include "prosim/corpus.hpp"

#include "prosim/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace prosim {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  // std::from_chars for double is available in libstdc++ 11.
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

class ChannelMap {
 public:
  int channel_for(const std::string& speaker) {
    const auto it = std::find(order_.begin(), order_.end(), speaker);
    if (it != order_.end()) return static_cast<int>(it - order_.begin());
    order_.push_back(speaker);
    return static_cast<int>(order_.size()) - 1;
  }

 private:
  std::vector<std::string> order_;
};

std::string line_ref(const std::string& conv, std::size_t line) {
  return conv + ":" + std::to_string(line);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

AlignmentParse parse_interval_table(std::string_view text, const std::string& conversation_id) {
  AlignmentParse out;
  ChannelMap channels;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    std::vector<std::string> cols;
    std::istringstream ss{std::string(line)};
    for (std::string tok; ss >> tok;) cols.push_back(tok);
    if (cols.size() != 4 && cols.size() != 5) {
      throw Error(Errc::ParseError, line_ref(conversation_id, line_no) +
                                        ": expected 4 or 5 columns, got " + std::to_string(cols.size()));
    }
    AlignedWord w;
    w.conversation_id = conversation_id;
    w.speaker_id = cols[0];
    w.word = cols[3];
    if (!parse_double(cols[1], w.start_s) || !parse_double(cols[2], w.end_s)) {
      throw Error(Errc::ParseError, line_ref(conversation_id, line_no) + ": bad time value");
    }
    if (cols.size() == 5) {
      double ch = 0.0;
      if (!parse_double(cols[4], ch) || (ch != 0.0 && ch != 1.0)) {
        throw Error(Errc::ParseError, line_ref(conversation_id, line_no) + ": channel must be 0 or 1");
      }
      w.channel = static_cast<int>(ch);
    } else {
      w.channel = channels.channel_for(w.speaker_id);
    }
    if (!(w.start_s < w.end_s)) {
      out.warnings.push_back(line_ref(conversation_id, line_no) + ": empty interval for '" + w.word + "'");
      continue;
    }
    out.words.push_back(std::move(w));
  }
  return out;
}

AlignmentParse parse_textgrid(std::string_view text, const std::string& conversation_id) {
  AlignmentParse out;
  ChannelMap channels;
  std::string tier_name;
  bool interval_tier = false;
  bool in_interval = false;
  double xmin = 0.0, xmax = 0.0;
  bool have_min = false, have_max = false;
  std::size_t interval_line = 0;

  auto speaker_of = [&](const std::string& name) -> std::optional<std::string> {
    if (name.ends_with("phones")) return std::nullopt;
    const auto sep = name.find(" - ");
    if (sep != std::string::npos) return name.substr(0, sep);
    if (name == "words") return conversation_id;
    return name;
  };

  auto parse_value = [&](std::string_view rhs, std::size_t line_no) -> std::string {
    rhs = trim(rhs);
    if (rhs.size() >= 2 && rhs.front() == '"' && rhs.back() == '"') {
      std::string v;
      for (std::size_t i = 1; i + 1 < rhs.size(); ++i) {
        if (rhs[i] == '"' && i + 2 < rhs.size() && rhs[i + 1] == '"') ++i;
        v += rhs[i];
      }
      return v;
    }
    if (!rhs.empty() && rhs.front() == '"') {
      throw Error(Errc::ParseError, line_ref(conversation_id, line_no) + ": unterminated string");
    }
    return std::string(rhs);
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool saw_header = false;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line.find("ooTextFile") != std::string_view::npos) saw_header = true;

    if (line.starts_with("item [") && line.ends_with(":")) {
      in_interval = false;
      interval_tier = false;
      tier_name.clear();
      continue;
    }
    if (line.starts_with("intervals [") && line.ends_with(":")) {
      in_interval = true;
      have_min = have_max = false;
      interval_line = line_no;
      continue;
    }
    if (line.starts_with("points [")) {
      in_interval = false;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view rhs = line.substr(eq + 1);

    if (key == "class") {
      interval_tier = parse_value(rhs, line_no) == "IntervalTier";
    } else if (key == "name") {
      tier_name = parse_value(rhs, line_no);
    } else if (in_interval && (key == "xmin" || key == "xmax")) {
      double v = 0.0;
      if (!parse_double(parse_value(rhs, line_no), v)) {
        throw Error(Errc::ParseError, line_ref(conversation_id, line_no) + ": bad " + key);
      }
      (key == "xmin" ? xmin : xmax) = v;
      (key == "xmin" ? have_min : have_max) = true;
    } else if (in_interval && key == "text") {
      if (!have_min || !have_max) {
        throw Error(Errc::ParseError, line_ref(conversation_id, line_no) + ": text before xmin/xmax");
      }
      in_interval = false;
      const std::string word = parse_value(rhs, line_no);
      const auto speaker = speaker_of(tier_name);
      if (!interval_tier || !speaker || trim(word).empty()) continue;
      if (!(xmin < xmax)) {
        out.warnings.push_back(line_ref(conversation_id, interval_line) + ": empty interval for '" +
                               word + "'");
        continue;
      }
      AlignedWord w;
      w.conversation_id = conversation_id;
      w.speaker_id = *speaker;
      w.channel = channels.channel_for(*speaker);
      w.word = std::string(trim(word));
      w.start_s = xmin;
      w.end_s = xmax;
      out.words.push_back(std::move(w));
    }
  }
  if (!saw_header && !out.words.empty()) return out;
  if (!saw_header) throw Error(Errc::ParseError, conversation_id + ":1: not a TextGrid");
  return out;
}

AlignmentParse parse_alignment(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const std::string conv = path.stem().string();
  if (path.extension() == ".TextGrid" || path.extension() == ".textgrid" ||
      text.find("ooTextFile") != std::string::npos) {
    return parse_textgrid(text, conv);
  }
  return parse_interval_table(text, conv);
}

TokenNormalizer::TokenNormalizer()
    : variants_{{"mm-hmm", "mhm"}, {"mm-hm", "mhm"},   {"mhmm", "mhm"},  {"mmhmm", "mhm"},
                {"uh-hum", "uh-huh"}, {"uhhuh", "uh-huh"}, {"ok", "okay"}, {"yep", "yup"},
                {"hmm", "hm"},     {"mm", "mmm"},       {"uhoh", "uh-oh"}, {"awww", "aww"}} {}

TokenNormalizer::TokenNormalizer(std::map<std::string, std::string> variants)
    : variants_(std::move(variants)) {}

void TokenNormalizer::add_variant(std::string from, std::string to) {
  variants_[std::move(from)] = std::move(to);
}

std::string TokenNormalizer::normalize(std::string_view token) const {
  std::string t;
  t.reserve(token.size());
  for (unsigned char ch : token) t += static_cast<char>(std::tolower(ch));
  auto keep = [](unsigned char ch) { return std::isalnum(ch) != 0; };
  const auto first = std::find_if(t.begin(), t.end(), keep);
  const auto last = std::find_if(t.rbegin(), t.rend(), keep).base();
  t = first < last ? std::string(first, last) : std::string();
  const auto it = variants_.find(t);
  return it == variants_.end() ? t : it->second;
}

std::set<std::string> default_inventory() {
  return {"absolutely", "ah",   "aww",  "exactly", "goodness", "gosh",   "hm",     "huh",
          "interesting", "jeez", "mhm",  "mmm",     "no",       "oh",     "okay",   "ooh",
          "pardon",     "really", "right", "sorry",  "sure",     "ugh",    "uh",     "uh-huh",
          "uh-oh",      "what", "wow",  "yeah",    "yes",      "yup"};
}

std::vector<FeedbackCandidate> extract_feedback(const std::vector<AlignedWord>& words,
                                                const std::set<std::string>& inventory,
                                                double isolation_gap_s,
                                                const TokenNormalizer& normalizer, double pad_s) {
  // Group indices per (conversation, speaker), ordered by start time.
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < words.size(); ++i) {
    by_speaker[{words[i].conversation_id, words[i].speaker_id}].push_back(i);
  }

  std::vector<FeedbackCandidate> candidates;
  for (auto& [key, idx] : by_speaker) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return words[a].start_s < words[b].start_s;
    });
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto& w = words[idx[k]];
      const std::string form = normalizer.normalize(w.word);
      if (!inventory.count(form)) continue;
      bool isolated = true;
      for (std::size_t o = 0; o < idx.size() && isolated; ++o) {
        if (o == k) continue;
        const auto& other = words[idx[o]];
        // Distance between intervals; zero when they overlap.
        const double gap = std::max({0.0, other.start_s - w.end_s, w.start_s - other.end_s});
        if (gap < isolation_gap_s) isolated = false;
      }
      if (isolated) candidates.push_back({w, form});
    }
  }

  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.word.conversation_id != b.word.conversation_id) {
      return a.word.conversation_id < b.word.conversation_id;
    }
    if (a.word.channel != b.word.channel) return a.word.channel < b.word.channel;
    if (a.word.start_s != b.word.start_s) return a.word.start_s < b.word.start_s;
    return a.word.speaker_id < b.word.speaker_id;
  });

  std::vector<FeedbackCandidate> out;
  for (auto& c : candidates) {
    if (!out.empty()) {
      const auto& prev = out.back().word;
      if (prev.conversation_id == c.word.conversation_id && prev.channel == c.word.channel &&
          c.word.start_s - pad_s < prev.end_s + pad_s) {
        continue;
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::string clip_id_for(const AlignedWord& w) {
  char key[64];
  std::snprintf(key, sizeof key, "|%d|%.3f|", w.channel, w.start_s);
  const std::uint64_t h = fnv1a(w.conversation_id + key + w.word);
  char id[24];
  std::snprintf(id, sizeof id, "c%016llx", static_cast<unsigned long long>(h));
  return id;
}

ClipRecord cut_clip(const PcmAudio& audio, const FeedbackCandidate& c, const CutOptions& opt) {
  const auto& w = c.word;
  if (w.channel < 0 || static_cast<std::size_t>(w.channel) >= audio.channels.size()) {
    throw Error(Errc::OutOfBounds, "channel " + std::to_string(w.channel) + " not in audio with " +
                                       std::to_string(audio.channels.size()) + " channels");
  }
  const double rate = audio.sample_rate;
  const double duration = static_cast<double>(audio.frames()) / rate;
  if (w.start_s >= duration || w.end_s <= 0.0) {
    throw Error(Errc::OutOfBounds, "word at " + std::to_string(w.start_s) + " s outside " +
                                       std::to_string(duration) + " s of audio");
  }
  const double t0 = std::max(0.0, w.start_s - opt.pad_s);
  const double t1 = std::min(duration, w.end_s + opt.pad_s);
  const auto s0 = static_cast<std::size_t>(std::llround(t0 * rate));
  const auto s1 = std::min(audio.frames(), static_cast<std::size_t>(std::llround(t1 * rate)));
  if (s1 <= s0) throw Error(Errc::OutOfBounds, "empty clip span");

  const auto& ch = audio.channels[static_cast<std::size_t>(w.channel)];
  std::vector<double> samples(ch.begin() + static_cast<std::ptrdiff_t>(s0),
                              ch.begin() + static_cast<std::ptrdiff_t>(s1));
  samples = resample(samples, audio.sample_rate, opt.target_rate);

  ClipRecord rec;
  rec.clip_id = clip_id_for(w);
  rec.dataset = opt.dataset;
  rec.lexical_form = c.lexical_form;
  rec.speaker_id = w.speaker_id;
  rec.duration_s = static_cast<double>(s1 - s0) / rate;
  const auto wav = opt.out_dir / (rec.clip_id + ".wav");
  std::filesystem::create_directories(opt.out_dir);
  write_wav(wav, {samples}, opt.target_rate);
  rec.wav_path = opt.manifest_dir.empty()
                     ? wav.string()
                     : std::filesystem::relative(wav, opt.manifest_dir).generic_string();
  return rec;
}

ClipRecord cut_clip(const std::filesystem::path& audio_path, const FeedbackCandidate& c,
                    const CutOptions& opt) {
  if (!std::filesystem::exists(audio_path)) {
    throw Error(Errc::AudioMissing, audio_path.string());
  }
  return cut_clip(read_wav(audio_path), c, opt);
}

}  // namespace prosim
