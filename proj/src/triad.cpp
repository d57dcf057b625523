#include "prosim/triad.hpp"

#include "prosim/error.hpp"
#include "prosim/rng.hpp"
#include "prosim/similarity.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <unordered_map>

namespace prosim {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Pair p) {
  switch (p) {
    case Pair::AB: return "AB";
    case Pair::AC: return "AC";
    case Pair::BC: return "BC";
  }
  return "AB";
}

Pair pair_from_string(std::string_view s) {
  if (s == "AB") return Pair::AB;
  if (s == "AC") return Pair::AC;
  if (s == "BC") return Pair::BC;
  throw Error(Errc::ParseError, "pair must be AB, AC or BC, got '" + std::string(s) + "'");
}

std::array<int, 2> pair_members(Pair p) {
  switch (p) {
    case Pair::AB: return {0, 1};
    case Pair::AC: return {0, 2};
    case Pair::BC: return {1, 2};
  }
  return {0, 1};
}

int pair_complement(Pair p) {
  switch (p) {
    case Pair::AB: return 2;
    case Pair::AC: return 1;
    case Pair::BC: return 0;
  }
  return 2;
}

Pair pair_of(int i, int j) {
  if (i > j) std::swap(i, j);
  if (i == 0 && j == 1) return Pair::AB;
  if (i == 0 && j == 2) return Pair::AC;
  if (i == 1 && j == 2) return Pair::BC;
  throw Error(Errc::InvalidArgument, "pair positions must be two distinct values in 0..2");
}

ordered_json to_json(const Triad& t) {
  ordered_json j;
  j["triad_id"] = t.triad_id;
  j["dataset"] = t.dataset;
  j["lexical_form"] = t.lexical_form;
  j["clips"] = {t.clips[0], t.clips[1], t.clips[2]};
  return j;
}

ordered_json to_json(const Judgment& jd) {
  ordered_json j;
  j["triad_id"] = jd.triad_id;
  j["rater_id"] = jd.rater_id;
  j["chosen_pair"] = std::string(to_string(jd.chosen_pair));
  j["is_attention_check"] = jd.is_attention_check;
  j["timestamp"] = jd.timestamp;
  return j;
}

ordered_json to_json(const ConsensusTriad& c) {
  ordered_json j;
  j["triad"] = to_json(c.triad);
  j["consensus_pair"] = std::string(to_string(c.consensus_pair));
  j["n_raters"] = c.n_raters;
  return j;
}

Triad triad_from_json(const json& j) {
  try {
    Triad t;
    t.triad_id = j.at("triad_id").get<std::string>();
    t.dataset = j.value("dataset", "");
    t.lexical_form = j.value("lexical_form", "");
    const auto& clips = j.at("clips");
    if (!clips.is_array() || clips.size() != 3) {
      throw Error(Errc::ParseError, "triad " + t.triad_id + " needs exactly three clips");
    }
    for (std::size_t i = 0; i < 3; ++i) t.clips[i] = clips[i].get<std::string>();
    return t;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("triad row: ") + e.what());
  }
}

Judgment judgment_from_json(const json& j) {
  try {
    Judgment jd;
    jd.triad_id = j.at("triad_id").get<std::string>();
    jd.rater_id = j.at("rater_id").get<std::string>();
    jd.chosen_pair = pair_from_string(j.at("chosen_pair").get<std::string>());
    jd.is_attention_check = j.value("is_attention_check", false);
    jd.timestamp = j.value("timestamp", "");
    return jd;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("judgment row: ") + e.what());
  }
}

ConsensusTriad consensus_from_json(const json& j) {
  try {
    ConsensusTriad c;
    c.triad = triad_from_json(j.at("triad"));
    c.consensus_pair = pair_from_string(j.at("consensus_pair").get<std::string>());
    c.n_raters = j.value("n_raters", 0);
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("consensus row: ") + e.what());
  }
}

std::vector<Triad> read_triads(const std::filesystem::path& path) {
  std::vector<Triad> out;
  for (const auto& row : read_jsonl(path)) out.push_back(triad_from_json(row));
  return out;
}

std::vector<Judgment> read_judgments(const std::filesystem::path& path) {
  std::vector<Judgment> out;
  for (const auto& row : read_jsonl(path)) out.push_back(judgment_from_json(row));
  return out;
}

std::vector<ConsensusTriad> read_consensus(const std::filesystem::path& path) {
  std::vector<ConsensusTriad> out;
  for (const auto& row : read_jsonl(path)) out.push_back(consensus_from_json(row));
  return out;
}

namespace {

template <typename T>
void write_rows(const std::vector<T>& items, const std::filesystem::path& path) {
  std::vector<ordered_json> rows;
  rows.reserve(items.size());
  for (const auto& it : items) rows.push_back(to_json(it));
  write_jsonl(path, rows);
}

}  // namespace

void write_triads(const std::vector<Triad>& triads, const std::filesystem::path& path) {
  write_rows(triads, path);
}

void write_judgments(const std::vector<Judgment>& judgments, const std::filesystem::path& path) {
  write_rows(judgments, path);
}

void write_consensus(const std::vector<ConsensusTriad>& consensus, const std::filesystem::path& path) {
  write_rows(consensus, path);
}

namespace {

std::uint64_t choose3(std::uint64_t n) { return n < 3 ? 0 : n * (n - 1) * (n - 2) / 6; }

struct FormGroup {
  std::string form;
  std::vector<const ClipRecord*> clips;
};

using IndexTriple = std::array<std::uint32_t, 3>;

}  // namespace

std::vector<Triad> sample_triads(const Manifest& manifest, std::size_t per_dataset_count,
                                 std::uint64_t seed) {
  std::map<std::string, std::map<std::string, FormGroup>> by_dataset;
  for (const auto& c : manifest.clips) {
    auto& g = by_dataset[c.dataset][c.lexical_form];
    g.form = c.lexical_form;
    g.clips.push_back(&c);
  }
  bool any_eligible = false;
  for (const auto& [ds, forms] : by_dataset) {
    for (const auto& [form, g] : forms) any_eligible = any_eligible || g.clips.size() >= 3;
  }
  if (!any_eligible) {
    throw Error(Errc::InsufficientClips, "no lexical form has three or more clips");
  }

  std::vector<Triad> out;
  std::uint64_t dataset_index = 0;
  for (const auto& [dataset, forms] : by_dataset) {
    Rng rng(derive_seed(seed, dataset_index++));
    std::vector<const FormGroup*> groups;
    std::vector<std::uint64_t> weights;
    std::uint64_t total = 0;
    for (const auto& [form, g] : forms) {
      if (g.clips.size() < 3) continue;
      groups.push_back(&g);
      weights.push_back(choose3(g.clips.size()));
      total += weights.back();
    }
    if (per_dataset_count > total) {
      throw Error(Errc::InsufficientClips,
                  "dataset '" + dataset + "' has " + std::to_string(total) +
                      " possible triads, requested " + std::to_string(per_dataset_count));
    }

    // (group index, sorted clip indices)
    std::vector<std::pair<std::size_t, IndexTriple>> picks;
    picks.reserve(per_dataset_count);
    constexpr std::uint64_t kEnumerateLimit = 200000;
    if (total <= kEnumerateLimit || 2 * per_dataset_count > total) {
      std::vector<std::pair<std::size_t, IndexTriple>> all;
      all.reserve(static_cast<std::size_t>(total));
      for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto n = static_cast<std::uint32_t>(groups[gi]->clips.size());
        for (std::uint32_t a = 0; a < n; ++a)
          for (std::uint32_t b = a + 1; b < n; ++b)
            for (std::uint32_t c = b + 1; c < n; ++c) all.push_back({gi, {a, b, c}});
      }
      // Partial Fisher-Yates: the first k slots become a uniform k-subset.
      for (std::size_t i = 0; i < per_dataset_count; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(all.size() - i));
        std::swap(all[i], all[j]);
        picks.push_back(all[i]);
      }
    } else {
      std::set<std::pair<std::size_t, IndexTriple>> seen;
      while (picks.size() < per_dataset_count) {
        std::uint64_t r = rng.below(total);
        std::size_t gi = 0;
        while (r >= weights[gi]) r -= weights[gi++];
        const auto n = groups[gi]->clips.size();
        IndexTriple t{};
        t[0] = static_cast<std::uint32_t>(rng.below(n));
        do t[1] = static_cast<std::uint32_t>(rng.below(n)); while (t[1] == t[0]);
        do t[2] = static_cast<std::uint32_t>(rng.below(n)); while (t[2] == t[0] || t[2] == t[1]);
        std::sort(t.begin(), t.end());
        if (seen.insert({gi, t}).second) picks.push_back({gi, t});
      }
    }

    for (std::size_t k = 0; k < picks.size(); ++k) {
      const auto& [gi, idx] = picks[k];
      std::vector<std::string> ids;
      for (auto i : idx) ids.push_back(groups[gi]->clips[i]->clip_id);
      rng.shuffle(ids);
      Triad t;
      char buf[32];
      std::snprintf(buf, sizeof buf, "-t%05zu", k);
      t.triad_id = dataset + buf;
      t.dataset = dataset;
      t.lexical_form = groups[gi]->form;
      t.clips = {ids[0], ids[1], ids[2]};
      out.push_back(std::move(t));
    }
  }
  return out;
}

std::vector<ConsensusTriad> consensus_filter(const std::vector<Triad>& triads,
                                             const std::vector<Judgment>& judgments,
                                             int required) {
  std::unordered_map<std::string, std::vector<Pair>> votes;
  for (const auto& j : judgments) {
    if (j.is_attention_check) continue;
    votes[j.triad_id].push_back(j.chosen_pair);
  }
  std::vector<ConsensusTriad> out;
  std::set<std::string> emitted;
  for (const auto& t : triads) {
    const auto it = votes.find(t.triad_id);
    if (it == votes.end() || !emitted.insert(t.triad_id).second) continue;
    const auto& v = it->second;
    if (static_cast<int>(v.size()) != required || v.empty()) continue;
    if (!std::all_of(v.begin(), v.end(), [&](Pair p) { return p == v.front(); })) continue;
    out.push_back({t, v.front(), required});
  }
  return out;
}

TriadScorer pairwise(PairScorer score) {
  return [score = std::move(score)](const ConsensusTriad& c) -> std::optional<TriadScores> {
    const auto& clips = c.triad.clips;
    TriadScores s{};
    for (Pair p : {Pair::AB, Pair::AC, Pair::BC}) {
      const auto [i, j] = pair_members(p);
      const auto v = score(clips[i], clips[j]);
      if (!v) return std::nullopt;
      s[static_cast<int>(p)] = *v;
    }
    return s;
  };
}

AgreementResult evaluate_agreement(const std::vector<ConsensusTriad>& consensus,
                                   const TriadScorer& scorer) {
  AgreementResult r;
  for (const auto& c : consensus) {
    const auto scores = scorer(c);
    if (!scores) {
      ++r.skipped;
      continue;
    }
    ++r.evaluated;
    const double best = std::max({(*scores)[0], (*scores)[1], (*scores)[2]});
    const auto n_best = std::count(scores->begin(), scores->end(), best);
    if (n_best == 1 && (*scores)[static_cast<int>(c.consensus_pair)] == best) ++r.hits;
  }
  if (r.evaluated == 0) {
    throw Error(Errc::NoEvaluableTriads,
                std::to_string(r.skipped) + " triads skipped, none evaluable");
  }
  r.percent = 100.0 * static_cast<double>(r.hits) / static_cast<double>(r.evaluated);
  return r;
}

std::vector<AgreementResult> probe_layers(const std::vector<ConsensusTriad>& consensus,
                                          const StackSet& stacks, const std::string& model_name) {
  std::uint32_t n_layers = 0;
  for (const auto& c : consensus) {
    for (const auto& id : c.triad.clips) {
      const auto it = stacks.find(id);
      if (it == stacks.end()) {
        throw Error(Errc::MissingStack, "no " + model_name + " stack for clip " + id);
      }
      if (n_layers == 0) n_layers = it->second.n_layers;
      if (it->second.n_layers != n_layers) {
        throw Error(Errc::ShapeMismatch, "stacks for " + model_name + " disagree on layer count");
      }
    }
  }
  std::vector<AgreementResult> curve;
  curve.reserve(n_layers);
  for (std::uint32_t layer = 0; layer < n_layers; ++layer) {
    PairScorer score = [&, layer](const std::string& a, const std::string& b) -> std::optional<double> {
      const auto va = stacks.at(a).layer(layer);
      const auto vb = stacks.at(b).layer(layer);
      const std::vector<double> da(va.begin(), va.end()), db(vb.begin(), vb.end());
      try {
        return cosine_similarity(da, db);
      } catch (const Error& e) {
        if (e.code() == Errc::ZeroVector) return std::nullopt;
        throw;
      }
    };
    curve.push_back(evaluate_agreement(consensus, pairwise(std::move(score))));
  }
  return curve;
}

}  // namespace prosim
