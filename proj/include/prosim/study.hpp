#pragma once

#include "prosim/manifest.hpp"
#include "prosim/triad.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

namespace prosim {

struct StudyConfig {
  int raters_per_triad = kDefaultRatersPerTriad;
  int tasks_per_session = 20;
  std::uint64_t seed = 17;
  std::string instructions = "Listen to the clips and choose two that are the most similar to each other.";
};

enum class AttentionStatus { Pending, Passed, Failed };

struct AttentionCheck {
  std::string triad_id;
  std::array<std::string, 3> clips;  // two of them play byte-identical audio
  Pair identical_pair = Pair::AB;
  std::string source_clip;  // the clip whose audio is duplicated
};

struct Session {
  std::string session_id;
  std::string rater_id;
  std::vector<std::string> tasks;  // triad ids, attention check included
  std::size_t attention_index = 0;
  AttentionCheck attention;
  std::size_t completed = 0;
  AttentionStatus attention_status = AttentionStatus::Pending;
};

// Public view of a session: no hint of which task is the attention check.
nlohmann::ordered_json session_view(const Session& s);

struct TriadView {
  std::string triad_id;
  std::string lexical_form;
  std::array<std::string, 3> clips;
};

// Study state backed by an append-only JSONL event log. Constructing a store
// over an existing log replays it, so a restart reproduces the exact state.
// Mutations serialize through one writer; the duplicate check and the append
// happen under the same lock.
class StudyStore {
 public:
  using Clock = std::function<std::string()>;

  StudyStore(std::vector<Triad> triads, Manifest manifest, std::filesystem::path log_path,
             StudyConfig cfg = {}, Clock clock = {});

  // Assigns the least-presented triads this rater has not seen plus one
  // attention check at a uniformly random slot. Throws StudyComplete when no
  // triad is eligible; the final sessions of a study may hold fewer tasks.
  Session create_session(const std::string& rater_id);

  // Throws UnknownTriad, SessionMismatch or DuplicateJudgment. The attention
  // flag is decided by the store, not the caller.
  void record_judgment(const Judgment& j);

  std::vector<unsigned char> serve_audio(const std::string& clip_id) const;
  TriadView triad_view(const std::string& triad_id) const;

  // Non-attention judgments from sessions that passed their attention
  // check, in log order.
  std::vector<Judgment> export_judgments() const;
  std::string export_jsonl() const;

  std::size_t presentations(const std::string& triad_id) const;
  std::optional<Session> session(const std::string& session_id) const;
  std::vector<Session> sessions_for(const std::string& rater_id) const;
  std::size_t judgment_count() const;
  const StudyConfig& config() const { return cfg_; }

 private:
  struct LoggedJudgment {
    Judgment judgment;
    std::string session_id;
  };

  void replay();
  void append(const nlohmann::ordered_json& event);
  void apply_session(Session s);
  void apply_judgment(const LoggedJudgment& j);
  const Session* owning_session(const std::string& rater_id, const std::string& triad_id) const;

  std::map<std::string, Triad> triads_;
  std::vector<std::string> triad_order_;
  Manifest manifest_;
  std::map<std::string, std::string> clip_paths_;  // clip id (or alias) -> wav path
  std::filesystem::path log_path_;
  StudyConfig cfg_;
  Clock clock_;

  mutable std::shared_mutex mu_;
  std::ofstream log_;
  std::map<std::string, Session> sessions_;
  std::vector<std::string> session_order_;
  std::map<std::string, std::string> attention_owner_;  // attention triad id -> session id
  std::map<std::string, std::size_t> presentations_;
  std::set<std::pair<std::string, std::string>> judged_;  // (rater, triad)
  std::vector<LoggedJudgment> judgments_;
};

std::string_view to_string(AttentionStatus s);

}  // namespace prosim
