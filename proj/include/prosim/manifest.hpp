#pragma once

#include "json.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace prosim {

// One manifest line: a feedback clip and where its audio and embeddings live.
struct ClipRecord {
  std::string clip_id;
  std::string dataset;
  std::string lexical_form;
  std::string speaker_id;
  std::optional<std::string> gender;
  std::string wav_path;
  std::optional<double> duration_s;
  std::map<std::string, std::string> emb_paths;  // model_name -> path
};

nlohmann::ordered_json to_json(const ClipRecord& r);
ClipRecord clip_from_json(const nlohmann::json& j);

struct Manifest {
  std::vector<ClipRecord> clips;
  // Relative wav/embedding paths resolve against this directory.
  std::filesystem::path base_dir;

  const ClipRecord* find(const std::string& clip_id) const;
  std::filesystem::path resolve(const std::string& p) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& m, const std::filesystem::path& path);

// JSONL helpers shared by every line-oriented file in the toolkit.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::ordered_json>& rows);
std::string dump_line(const nlohmann::ordered_json& j);

// Review CSV (clip_id,lexical_form,speaker_id,wav_path,approved) where
// approved is pending, yes or no.
struct ReviewRow {
  std::string clip_id;
  std::string lexical_form;
  std::string speaker_id;
  std::string wav_path;
  std::string approved = "pending";
};

void write_review_csv(const std::vector<ReviewRow>& rows, const std::filesystem::path& path);
std::vector<ReviewRow> read_review_csv(const std::filesystem::path& path);

// Keeps only clips whose review row says "yes".
Manifest filter_approved(const Manifest& m, const std::vector<ReviewRow>& review);

}  // namespace prosim
