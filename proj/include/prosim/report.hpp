#pragma once

#include "prosim/triad.hpp"

#include "json.hpp"

#include <map>
#include <string>
#include <vector>

namespace prosim {

inline constexpr double kRandomBaselinePercent = 100.0 / 3.0;
inline constexpr const char* kBaselineRow = "random baseline";

// Agreement for one metric on one dataset. Scalar metrics have lo == hi;
// embedding rows span the range over layers.
struct ReportCell {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

struct ReportRow {
  std::string metric;
  std::map<std::string, ReportCell> by_dataset;
};

struct AgreementReport {
  std::vector<ReportRow> rows;

  // Adds or merges a cell.
  void set(const std::string& metric, const std::string& dataset, const ReportCell& cell);
};

ReportCell cell_from(const AgreementResult& r);
ReportCell cell_from_range(const std::vector<AgreementResult>& per_layer);

// Row names in the order the table lists them.
const std::vector<std::string>& canonical_metric_order();

struct RenderedReport {
  std::string csv;
  std::string text;
};

// Rows are sorted into canonical order (unknown rows after the known ones,
// alphabetically), dataset columns that no row fills are omitted and the
// random-baseline row is always appended.
RenderedReport emit_table(const AgreementReport& report);

nlohmann::ordered_json to_json(const AgreementReport& r);
AgreementReport report_from_json(const nlohmann::json& j);

struct LayerCurve {
  std::string model;
  std::string dataset;
  std::vector<AgreementResult> layers;
};

std::string layer_curves_csv(const std::vector<LayerCurve>& curves);

std::string format_percent(double v);

}  // namespace prosim
