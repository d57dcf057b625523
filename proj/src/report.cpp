#include "prosim/report.hpp"

#include "prosim/error.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

namespace prosim {

using nlohmann::json;
using nlohmann::ordered_json;

void AgreementReport::set(const std::string& metric, const std::string& dataset,
                          const ReportCell& cell) {
  for (auto& row : rows) {
    if (row.metric == metric) {
      row.by_dataset[dataset] = cell;
      return;
    }
  }
  rows.push_back({metric, {{dataset, cell}}});
}

ReportCell cell_from(const AgreementResult& r) {
  return {r.percent, r.percent, r.evaluated, r.skipped};
}

ReportCell cell_from_range(const std::vector<AgreementResult>& per_layer) {
  if (per_layer.empty()) throw Error(Errc::InvalidArgument, "empty layer curve");
  ReportCell c{per_layer.front().percent, per_layer.front().percent, 0, 0};
  for (const auto& r : per_layer) {
    c.lo = std::min(c.lo, r.percent);
    c.hi = std::max(c.hi, r.percent);
    c.evaluated = std::max(c.evaluated, r.evaluated);
    c.skipped = std::max(c.skipped, r.skipped);
  }
  return c;
}

const std::vector<std::string>& canonical_metric_order() {
  static const std::vector<std::string> order = {
      "mean pitch",
      "min pitch",
      "max pitch",
      "voiced length",
      "pitch range",
      "height (LP curve)",
      "slope (LP curve)",
      "convexity (LP curve)",
      "LP combined cos. sim.",
      "HuBERT cos. sim.",
      "Whisper cos. sim.",
      "wav2vec2 cos. sim.",
      "W2v-BERT cos. sim.",
      "spectrogram cos. sim.",
      "spectral convergence",
  };
  return order;
}

std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

namespace {

// Embedding rows not in the canonical list still belong with the embedding
// block, before the spectral rows.
std::pair<int, std::string> row_key(const std::string& metric) {
  const auto& order = canonical_metric_order();
  const auto it = std::find(order.begin(), order.end(), metric);
  if (it != order.end()) return {static_cast<int>(it - order.begin()), ""};
  if (metric.ends_with(" cos. sim.")) return {12, metric};
  return {100, metric};
}

std::vector<std::string> dataset_columns(const AgreementReport& report) {
  std::set<std::string> present;
  for (const auto& row : report.rows) {
    for (const auto& [ds, cell] : row.by_dataset) present.insert(ds);
  }
  std::vector<std::string> cols;
  for (const char* known : {"FiCa", "Fisher"}) {
    if (present.erase(known)) cols.push_back(known);
  }
  cols.insert(cols.end(), present.begin(), present.end());
  return cols;
}

std::string render_cell(const ReportCell& c) {
  if (c.lo == c.hi) return format_percent(c.lo);
  return format_percent(c.lo) + " -- " + format_percent(c.hi);
}

}  // namespace

RenderedReport emit_table(const AgreementReport& report) {
  std::vector<const ReportRow*> rows;
  for (const auto& r : report.rows) {
    if (r.metric != kBaselineRow) rows.push_back(&r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow* a, const ReportRow* b) {
    return row_key(a->metric) < row_key(b->metric);
  });
  const auto cols = dataset_columns(report);

  std::ostringstream csv;
  csv << "metric,dataset,agreement_min,agreement_max,evaluated,skipped\n";
  for (const auto* row : rows) {
    for (const auto& ds : cols) {
      const auto it = row->by_dataset.find(ds);
      if (it == row->by_dataset.end()) continue;
      const auto& c = it->second;
      csv << row->metric << ',' << ds << ',' << format_percent(c.lo) << ','
          << format_percent(c.hi) << ',' << c.evaluated << ',' << c.skipped << '\n';
    }
  }
  for (const auto& ds : cols) {
    csv << kBaselineRow << ',' << ds << ',' << format_percent(kRandomBaselinePercent) << ','
        << format_percent(kRandomBaselinePercent) << ",,\n";
  }

  std::vector<std::vector<std::string>> table;
  table.push_back({"metric"});
  for (const auto& ds : cols) table.back().push_back(ds);
  for (const auto* row : rows) {
    std::vector<std::string> line{row->metric};
    for (const auto& ds : cols) {
      const auto it = row->by_dataset.find(ds);
      line.push_back(it == row->by_dataset.end() ? "-" : render_cell(it->second));
    }
    table.push_back(std::move(line));
  }
  {
    std::vector<std::string> line{kBaselineRow};
    for (std::size_t i = 0; i < cols.size(); ++i) line.push_back(format_percent(kRandomBaselinePercent));
    table.push_back(std::move(line));
  }

  std::vector<std::size_t> widths(cols.size() + 1, 0);
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], line[i].size());
  }
  std::ostringstream text;
  auto rule = [&] {
    std::size_t total = 0;
    for (auto w : widths) total += w + 2;
    text << std::string(total - 2, '-') << '\n';
  };
  for (std::size_t r = 0; r < table.size(); ++r) {
    if (r == 1 || r + 1 == table.size()) rule();
    const auto& line = table[r];
    std::string out;
    for (std::size_t i = 0; i < line.size(); ++i) {
      std::string cell = line[i];
      if (i + 1 < line.size()) cell.resize(widths[i], ' ');
      out += cell;
      if (i + 1 < line.size()) out += "  ";
    }
    text << out << '\n';
  }
  return {csv.str(), text.str()};
}

ordered_json to_json(const AgreementReport& r) {
  ordered_json rows = ordered_json::array();
  for (const auto& row : r.rows) {
    ordered_json cells = ordered_json::object();
    for (const auto& [ds, c] : row.by_dataset) {
      cells[ds] = {{"lo", c.lo}, {"hi", c.hi}, {"evaluated", c.evaluated}, {"skipped", c.skipped}};
    }
    rows.push_back({{"metric", row.metric}, {"datasets", cells}});
  }
  return {{"rows", rows}};
}

AgreementReport report_from_json(const json& j) {
  AgreementReport r;
  try {
    for (const auto& row : j.at("rows")) {
      const auto metric = row.at("metric").get<std::string>();
      for (const auto& [ds, c] : row.at("datasets").items()) {
        r.set(metric, ds,
              {c.at("lo").get<double>(), c.at("hi").get<double>(),
               c.value("evaluated", std::size_t{0}), c.value("skipped", std::size_t{0})});
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("report: ") + e.what());
  }
  return r;
}

std::string layer_curves_csv(const std::vector<LayerCurve>& curves) {
  std::ostringstream out;
  out << "model,dataset,layer,agreement,hits,evaluated,skipped\n";
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.layers.size(); ++i) {
      const auto& r = c.layers[i];
      out << c.model << ',' << c.dataset << ',' << i << ',' << format_percent(r.percent) << ','
          << r.hits << ',' << r.evaluated << ',' << r.skipped << '\n';
    }
  }
  return out.str();
}

}  // namespace prosim
