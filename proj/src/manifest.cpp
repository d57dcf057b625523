#include "prosim/manifest.hpp"

#include "prosim/error.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace prosim {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json to_json(const ClipRecord& r) {
  ordered_json j;
  j["clip_id"] = r.clip_id;
  j["dataset"] = r.dataset;
  j["lexical_form"] = r.lexical_form;
  j["speaker_id"] = r.speaker_id;
  if (r.gender) j["gender"] = *r.gender;
  j["wav_path"] = r.wav_path;
  if (r.duration_s) j["duration_s"] = *r.duration_s;
  ordered_json emb = ordered_json::object();
  for (const auto& [model, path] : r.emb_paths) emb[model] = path;
  j["emb_paths"] = emb;
  return j;
}

ClipRecord clip_from_json(const json& j) {
  ClipRecord r;
  try {
    r.clip_id = j.at("clip_id").get<std::string>();
    r.dataset = j.value("dataset", "");
    r.lexical_form = j.value("lexical_form", "");
    r.speaker_id = j.value("speaker_id", "");
    if (j.contains("gender") && j["gender"].is_string()) r.gender = j["gender"].get<std::string>();
    r.wav_path = j.value("wav_path", "");
    if (j.contains("duration_s") && j["duration_s"].is_number()) {
      r.duration_s = j["duration_s"].get<double>();
    }
    if (j.contains("emb_paths") && j["emb_paths"].is_object()) {
      for (const auto& [model, path] : j["emb_paths"].items()) {
        r.emb_paths[model] = path.get<std::string>();
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("manifest row: ") + e.what());
  }
  return r;
}

const ClipRecord* Manifest::find(const std::string& clip_id) const {
  for (const auto& c : clips) {
    if (c.clip_id == clip_id) return &c;
  }
  return nullptr;
}

std::filesystem::path Manifest::resolve(const std::string& p) const {
  std::filesystem::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path;
  return base_dir / path;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

std::string dump_line(const ordered_json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

void write_jsonl(const std::filesystem::path& path, const std::vector<ordered_json>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  for (const auto& r : rows) out << dump_line(r) << '\n';
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  Manifest m;
  m.base_dir = path.parent_path();
  for (const auto& row : read_jsonl(path)) m.clips.push_back(clip_from_json(row));
  return m;
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::vector<ordered_json> rows;
  rows.reserve(m.clips.size());
  for (const auto& c : m.clips) rows.push_back(to_json(c));
  write_jsonl(path, rows);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

void write_review_csv(const std::vector<ReviewRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "clip_id,lexical_form,speaker_id,wav_path,approved\n";
  for (const auto& r : rows) {
    out << csv_field(r.clip_id) << ',' << csv_field(r.lexical_form) << ','
        << csv_field(r.speaker_id) << ',' << csv_field(r.wav_path) << ',' << csv_field(r.approved)
        << '\n';
  }
}

std::vector<ReviewRow> read_review_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<ReviewRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 5) {
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(line_no) +
                                        ": expected 5 columns");
    }
    rows.push_back({f[0], f[1], f[2], f[3], f[4]});
  }
  return rows;
}

Manifest filter_approved(const Manifest& m, const std::vector<ReviewRow>& review) {
  std::set<std::string> approved;
  for (const auto& r : review) {
    if (r.approved == "yes") approved.insert(r.clip_id);
  }
  Manifest out;
  out.base_dir = m.base_dir;
  for (const auto& c : m.clips) {
    if (approved.count(c.clip_id)) out.clips.push_back(c);
  }
  return out;
}

}  // namespace prosim
