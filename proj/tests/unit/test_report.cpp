#include "doctest.h"

#include "prosim/report.hpp"

#include <sstream>

using namespace prosim;

namespace {

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

bool contains(const std::string& s, const std::string& needle) { return s.find(needle) != std::string::npos; }

}  // namespace

TEST_SUITE("report") {

TEST_CASE("emit_table: mean pitch row as printed in the paper") {
  AgreementReport r;
  r.set("mean pitch", "FiCa", {46.91, 46.91, 486, 0});
  r.set("mean pitch", "Fisher", {48.73, 48.73, 394, 0});
  const auto out = emit_table(r);
  const auto csv = lines_of(out.csv);
  REQUIRE(csv.size() == 5);
  CHECK(csv[0] == "metric,dataset,agreement_min,agreement_max,evaluated,skipped");
  CHECK(csv[1] == "mean pitch,FiCa,46.91,46.91,486,0");
  CHECK(csv[2] == "mean pitch,Fisher,48.73,48.73,394,0");
  CHECK(csv[3] == "random baseline,FiCa,33.33,33.33,,");
  CHECK(csv[4] == "random baseline,Fisher,33.33,33.33,,");

  bool found = false;
  for (const auto& l : lines_of(out.text)) {
    if (l.rfind("mean pitch", 0) == 0) {
      found = true;
      CHECK(contains(l, "46.91"));
      CHECK(contains(l, "48.73"));
      CHECK(l.find("46.91") < l.find("48.73"));
    }
  }
  CHECK(found);
}

TEST_CASE("emit_table: rows in table order, ranges rendered") {
  AgreementReport r;
  r.set("spectral convergence", "FiCa", {66.26, 66.26, 1, 0});
  r.set("HuBERT cos. sim.", "FiCa", {60.70, 72.63, 1, 0});
  r.set("voiced length", "FiCa", {60.49, 60.49, 1, 0});
  r.set("my-model cos. sim.", "FiCa", {50, 55, 1, 0});
  r.set("zzz custom", "FiCa", {40, 40, 1, 0});
  const auto csv = lines_of(emit_table(r).csv);
  REQUIRE(csv.size() == 7);
  CHECK(csv[1].rfind("voiced length,", 0) == 0);
  CHECK(csv[2].rfind("HuBERT cos. sim.,FiCa,60.70,72.63", 0) == 0);
  CHECK(csv[3].rfind("my-model cos. sim.,", 0) == 0);
  CHECK(csv[4].rfind("spectral convergence,", 0) == 0);
  CHECK(csv[5].rfind("zzz custom,", 0) == 0);
  CHECK(contains(emit_table(r).text, "60.70 -- 72.63"));
}

TEST_CASE("emit_table: unused dataset columns are omitted, baseline always present") {
  AgreementReport r;
  r.set("mean pitch", "FiCa", {50, 50, 10, 0});
  const auto out = emit_table(r);
  CHECK_FALSE(contains(out.csv, "Fisher"));
  CHECK_FALSE(contains(out.text, "Fisher"));
  CHECK(contains(out.csv, "random baseline,FiCa,33.33,33.33"));
  CHECK(contains(out.text, "random baseline"));

  r.set("mean pitch", "Switchboard", {40, 40, 1, 0});
  const auto header = lines_of(emit_table(r).text);
  bool cols_in_order = false;
  for (const auto& l : header) {
    if (contains(l, "FiCa") && contains(l, "Switchboard")) cols_in_order = l.find("FiCa") < l.find("Switchboard");
  }
  CHECK(cols_in_order);
}

TEST_CASE("emit_table: deterministic and independent of insertion order") {
  AgreementReport a, b;
  a.set("min pitch", "FiCa", {38.68, 38.68, 1, 0});
  a.set("mean pitch", "Fisher", {48.73, 48.73, 1, 0});
  b.set("mean pitch", "Fisher", {48.73, 48.73, 1, 0});
  b.set("min pitch", "FiCa", {38.68, 38.68, 1, 0});
  CHECK(emit_table(a).csv == emit_table(b).csv);
  CHECK(emit_table(a).text == emit_table(b).text);
}

TEST_CASE("report json round trip and cell helpers") {
  AgreementReport r;
  r.set("mean pitch", "FiCa", {46.91, 46.91, 486, 3});
  r.set("wav2vec2 cos. sim.", "Fisher", {38.83, 65.48, 394, 0});
  const auto back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  CHECK(emit_table(back).csv == emit_table(r).csv);

  const std::vector<AgreementResult> layers = {{40, 4, 10, 0}, {70, 7, 10, 0}, {55, 5, 10, 1}};
  const auto cell = cell_from_range(layers);
  CHECK(cell.lo == 40);
  CHECK(cell.hi == 70);
  CHECK(cell_from(layers[1]).lo == cell_from(layers[1]).hi);

  const auto curve = layer_curves_csv({{"m", "FiCa", layers}});
  CHECK(lines_of(curve).size() == 4);
  CHECK(format_percent(100.0 / 3.0) == "33.33");
  CHECK(format_percent(200.0 / 3.0) == "66.67");
}

}
