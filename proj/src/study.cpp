#include "prosim/study.hpp"

#include "prosim/error.hpp"
#include "prosim/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <iterator>
#include <sstream>

namespace prosim {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(AttentionStatus s) {
  switch (s) {
    case AttentionStatus::Pending: return "pending";
    case AttentionStatus::Passed: return "passed";
    case AttentionStatus::Failed: return "failed";
  }
  return "pending";
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex_id(char prefix, std::string_view key) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : key) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%c%016llx", prefix, static_cast<unsigned long long>(h));
  return buf;
}

ordered_json session_event(const Session& s) {
  ordered_json j;
  j["event"] = "session";
  j["session_id"] = s.session_id;
  j["rater_id"] = s.rater_id;
  j["tasks"] = s.tasks;
  j["attention_index"] = s.attention_index;
  j["attention"] = {{"triad_id", s.attention.triad_id},
                    {"clips", s.attention.clips},
                    {"identical_pair", std::string(to_string(s.attention.identical_pair))},
                    {"source_clip", s.attention.source_clip}};
  return j;
}

Session session_from_event(const json& j) {
  Session s;
  s.session_id = j.at("session_id").get<std::string>();
  s.rater_id = j.at("rater_id").get<std::string>();
  s.tasks = j.at("tasks").get<std::vector<std::string>>();
  s.attention_index = j.at("attention_index").get<std::size_t>();
  const auto& a = j.at("attention");
  s.attention.triad_id = a.at("triad_id").get<std::string>();
  const auto clips = a.at("clips").get<std::vector<std::string>>();
  if (clips.size() != 3) throw Error(Errc::ParseError, "attention check needs three clips");
  s.attention.clips = {clips[0], clips[1], clips[2]};
  s.attention.identical_pair = pair_from_string(a.at("identical_pair").get<std::string>());
  s.attention.source_clip = a.at("source_clip").get<std::string>();
  return s;
}

}  // namespace

ordered_json session_view(const Session& s) {
  ordered_json j;
  j["session_id"] = s.session_id;
  j["rater_id"] = s.rater_id;
  j["tasks"] = s.tasks;
  j["completed"] = s.completed;
  return j;
}

StudyStore::StudyStore(std::vector<Triad> triads, Manifest manifest,
                       std::filesystem::path log_path, StudyConfig cfg, Clock clock)
    : manifest_(std::move(manifest)),
      log_path_(std::move(log_path)),
      cfg_(std::move(cfg)),
      clock_(clock ? std::move(clock) : Clock(utc_now)) {
  if (cfg_.raters_per_triad < 1 || cfg_.tasks_per_session < 1) {
    throw Error(Errc::InvalidArgument, "raters per triad and tasks per session must be >= 1");
  }
  for (auto& t : triads) {
    if (triads_.count(t.triad_id)) throw Error(Errc::InvalidArgument, "duplicate triad " + t.triad_id);
    triad_order_.push_back(t.triad_id);
    triads_[t.triad_id] = std::move(t);
  }
  for (const auto& c : manifest_.clips) clip_paths_[c.clip_id] = manifest_.resolve(c.wav_path).string();
  replay();
  log_.open(log_path_, std::ios::binary | std::ios::app);
  if (!log_) throw Error(Errc::IoError, "cannot open judgment log " + log_path_.string());
}

void StudyStore::replay() {
  std::ifstream in(log_path_);
  if (!in) return;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json ev;
    try {
      ev = json::parse(line);
    } catch (const json::parse_error&) {
      // A torn final line from a crash mid-append is dropped; anything
      // earlier means the log is corrupt.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw Error(Errc::ParseError, log_path_.string() + ":" + std::to_string(line_no));
    }
    const auto kind = ev.value("event", "");
    if (kind == "session") {
      apply_session(session_from_event(ev));
    } else if (kind == "judgment") {
      apply_judgment({judgment_from_json(ev), ev.value("session_id", "")});
    }
  }
}

void StudyStore::append(const ordered_json& event) {
  log_ << dump_line(event) << '\n';
  log_.flush();
  if (!log_) throw Error(Errc::IoError, "append to judgment log failed");
}

void StudyStore::apply_session(Session s) {
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    if (i != s.attention_index) ++presentations_[s.tasks[i]];
  }
  attention_owner_[s.attention.triad_id] = s.session_id;
  const auto src = clip_paths_.find(s.attention.source_clip);
  if (src != clip_paths_.end()) {
    for (const auto& c : s.attention.clips) clip_paths_.emplace(c, src->second);
  }
  session_order_.push_back(s.session_id);
  sessions_[s.session_id] = std::move(s);
}

void StudyStore::apply_judgment(const LoggedJudgment& lj) {
  judged_.insert({lj.judgment.rater_id, lj.judgment.triad_id});
  auto it = sessions_.find(lj.session_id);
  if (it != sessions_.end()) {
    auto& s = it->second;
    ++s.completed;
    if (lj.judgment.is_attention_check) {
      s.attention_status = lj.judgment.chosen_pair == s.attention.identical_pair
                               ? AttentionStatus::Passed
                               : AttentionStatus::Failed;
    }
  }
  judgments_.push_back(lj);
}

Session StudyStore::create_session(const std::string& rater_id) {
  if (rater_id.empty()) throw Error(Errc::InvalidArgument, "rater_id is required");
  std::unique_lock lock(mu_);

  std::set<std::string> seen;
  for (const auto& [id, s] : sessions_) {
    if (s.rater_id == rater_id) seen.insert(s.tasks.begin(), s.tasks.end());
  }
  // (presentations, triad id) so the sort below needs no lookups.
  std::vector<std::pair<std::size_t, std::string>> ranked;
  for (const auto& id : triad_order_) {
    const auto it = presentations_.find(id);
    const std::size_t shown = it == presentations_.end() ? 0 : it->second;
    if (shown < static_cast<std::size_t>(cfg_.raters_per_triad) && !seen.count(id)) {
      ranked.emplace_back(shown, id);
    }
  }
  if (ranked.empty()) throw Error(Errc::StudyComplete, "no triads left for rater " + rater_id);

  Rng rng(derive_seed(cfg_.seed, sessions_.size()));
  rng.shuffle(ranked);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  const auto n_tasks = std::min(ranked.size(), static_cast<std::size_t>(cfg_.tasks_per_session));
  std::vector<std::string> eligible;
  eligible.reserve(n_tasks);
  for (std::size_t i = 0; i < n_tasks; ++i) eligible.push_back(std::move(ranked[i].second));

  char sid[24];
  std::snprintf(sid, sizeof sid, "s%05zu", sessions_.size() + 1);
  Session s;
  s.session_id = sid;
  s.rater_id = rater_id;

  // Attention check: a clip, a byte-identical alias of it and a different
  // clip of the same lexical form, in random order.
  const Triad& base = triads_.at(eligible[rng.below(eligible.size())]);
  const auto src_pos = static_cast<std::size_t>(rng.below(3));
  auto other_pos = static_cast<std::size_t>(rng.below(2));
  if (other_pos >= src_pos) ++other_pos;
  const std::string source = base.clips[src_pos];
  const std::string alias = hex_id('c', s.session_id + "|" + source);
  std::vector<std::string> clips = {source, alias, base.clips[other_pos]};
  rng.shuffle(clips);
  s.attention.triad_id = base.dataset + "-" + hex_id('a', s.session_id).substr(0, 9);
  s.attention.clips = {clips[0], clips[1], clips[2]};
  s.attention.source_clip = source;
  int a = -1, b = -1;
  for (int i = 0; i < 3; ++i) {
    if (clips[i] == source || clips[i] == alias) (a < 0 ? a : b) = i;
  }
  s.attention.identical_pair = pair_of(a, b);

  s.tasks = eligible;
  s.attention_index = static_cast<std::size_t>(rng.below(s.tasks.size() + 1));
  s.tasks.insert(s.tasks.begin() + static_cast<std::ptrdiff_t>(s.attention_index), s.attention.triad_id);

  append(session_event(s));
  apply_session(s);
  return sessions_.at(s.session_id);
}

const Session* StudyStore::owning_session(const std::string& rater_id,
                                          const std::string& triad_id) const {
  for (const auto& id : session_order_) {
    const auto& s = sessions_.at(id);
    if (s.rater_id != rater_id) continue;
    if (std::find(s.tasks.begin(), s.tasks.end(), triad_id) != s.tasks.end()) return &s;
  }
  return nullptr;
}

void StudyStore::record_judgment(const Judgment& j) {
  std::unique_lock lock(mu_);
  const bool attention = attention_owner_.count(j.triad_id) > 0;
  if (!attention && !triads_.count(j.triad_id)) throw Error(Errc::UnknownTriad, j.triad_id);
  const Session* s = owning_session(j.rater_id, j.triad_id);
  if (s == nullptr) {
    throw Error(Errc::SessionMismatch, "triad " + j.triad_id + " is not in a session of " + j.rater_id);
  }
  if (judged_.count({j.rater_id, j.triad_id})) {
    throw Error(Errc::DuplicateJudgment, j.rater_id + " already judged " + j.triad_id);
  }
  LoggedJudgment lj{j, s->session_id};
  lj.judgment.is_attention_check = attention;
  if (lj.judgment.timestamp.empty()) lj.judgment.timestamp = clock_();
  ordered_json ev = {{"event", "judgment"}, {"session_id", lj.session_id}};
  const ordered_json fields = to_json(lj.judgment);
  for (const auto& [k, v] : fields.items()) ev[k] = v;
  append(ev);
  apply_judgment(lj);
}

std::vector<unsigned char> StudyStore::serve_audio(const std::string& clip_id) const {
  std::string path;
  {
    std::shared_lock lock(mu_);
    const auto it = clip_paths_.find(clip_id);
    if (it == clip_paths_.end()) throw Error(Errc::NotFound, "clip " + clip_id);
    path = it->second;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::NotFound, "audio file for " + clip_id);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TriadView StudyStore::triad_view(const std::string& triad_id) const {
  std::shared_lock lock(mu_);
  if (const auto it = triads_.find(triad_id); it != triads_.end()) {
    return {it->second.triad_id, it->second.lexical_form, it->second.clips};
  }
  if (const auto it = attention_owner_.find(triad_id); it != attention_owner_.end()) {
    const auto& s = sessions_.at(it->second);
    const auto src = std::find_if(triads_.begin(), triads_.end(), [&](const auto& kv) {
      const auto& c = kv.second.clips;
      return std::find(c.begin(), c.end(), s.attention.source_clip) != c.end();
    });
    return {triad_id, src == triads_.end() ? "" : src->second.lexical_form, s.attention.clips};
  }
  throw Error(Errc::UnknownTriad, triad_id);
}

std::vector<Judgment> StudyStore::export_judgments() const {
  std::shared_lock lock(mu_);
  std::vector<Judgment> out;
  for (const auto& lj : judgments_) {
    if (lj.judgment.is_attention_check) continue;
    const auto it = sessions_.find(lj.session_id);
    if (it == sessions_.end() || it->second.attention_status != AttentionStatus::Passed) continue;
    out.push_back(lj.judgment);
  }
  return out;
}

std::string StudyStore::export_jsonl() const {
  std::string out;
  for (const auto& j : export_judgments()) out += dump_line(to_json(j)) + "\n";
  return out;
}

std::size_t StudyStore::presentations(const std::string& triad_id) const {
  std::shared_lock lock(mu_);
  const auto it = presentations_.find(triad_id);
  return it == presentations_.end() ? 0 : it->second;
}

std::optional<Session> StudyStore::session(const std::string& session_id) const {
  std::shared_lock lock(mu_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

std::vector<Session> StudyStore::sessions_for(const std::string& rater_id) const {
  std::shared_lock lock(mu_);
  std::vector<Session> out;
  for (const auto& id : session_order_) {
    if (sessions_.at(id).rater_id == rater_id) out.push_back(sessions_.at(id));
  }
  return out;
}

std::size_t StudyStore::judgment_count() const {
  std::shared_lock lock(mu_);
  return judgments_.size();
}

}  // namespace prosim
