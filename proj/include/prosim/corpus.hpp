#pragma once

#include "prosim/audio.hpp"
#include "prosim/manifest.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace prosim {

struct AlignedWord {
  std::string conversation_id;
  int channel = 0;
  std::string word;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string speaker_id;
};

struct AlignmentParse {
  std::vector<AlignedWord> words;
  std::vector<std::string> warnings;  // rejected rows
};

// Interval table: one word per line, whitespace separated
//   <speaker_id> <start_s> <end_s> <word> [<channel>]
// '#' starts a comment. Without a channel column, speakers map to channels
// 0, 1, ... in order of first appearance.
AlignmentParse parse_interval_table(std::string_view text, const std::string& conversation_id);

// Praat long-format TextGrid with interval tiers. Tiers named
// "<speaker> - words" (or any tier not ending in "phones") contribute words.
AlignmentParse parse_textgrid(std::string_view text, const std::string& conversation_id);

// Picks the parser from the content; the conversation id is the file stem.
// Throws ParseError with the offending line.
AlignmentParse parse_alignment(const std::filesystem::path& path);

// Lowercases, strips surrounding punctuation and maps spelling variants
// ("mm-hmm" -> "mhm").
class TokenNormalizer {
 public:
  TokenNormalizer();
  explicit TokenNormalizer(std::map<std::string, std::string> variants);

  std::string normalize(std::string_view token) const;
  void add_variant(std::string from, std::string to);

 private:
  std::map<std::string, std::string> variants_;
};

// Union of the lexical forms used for both corpora.
std::set<std::string> default_inventory();

struct FeedbackCandidate {
  AlignedWord word;
  std::string lexical_form;
};

// A word is a candidate iff its normalized token is in the inventory and no
// other word from the same speaker lies within `isolation_gap_s` on either
// side. Candidates whose padded spans would overlap on one channel are
// thinned, keeping the earlier one.
std::vector<FeedbackCandidate> extract_feedback(const std::vector<AlignedWord>& words,
                                                const std::set<std::string>& inventory,
                                                double isolation_gap_s = 0.5,
                                                const TokenNormalizer& normalizer = {},
                                                double pad_s = 0.1);

// Content-derived id: hash of conversation, channel, start and word.
std::string clip_id_for(const AlignedWord& w);

struct CutOptions {
  double pad_s = 0.1;
  int target_rate = kCanonicalRate;
  std::string dataset;
  std::filesystem::path out_dir;
  // Stored in the manifest; relative to the manifest when non-empty.
  std::filesystem::path manifest_dir;
};

// Cuts [start - pad, end + pad] (clamped to the file) from the word's
// channel, resamples and writes a mono 16-bit WAV named <clip_id>.wav.
// Throws OutOfBounds when the word or channel lies outside the audio.
ClipRecord cut_clip(const PcmAudio& audio, const FeedbackCandidate& c, const CutOptions& opt);
// Throws AudioMissing when the file does not exist.
ClipRecord cut_clip(const std::filesystem::path& audio_path, const FeedbackCandidate& c,
                    const CutOptions& opt);

}  // namespace prosim
