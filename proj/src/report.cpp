#include "groundjudge/report.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "groundjudge/error.hpp"

namespace groundjudge {
namespace {

std::string RowLabel(const MetaResult& r) {
  return r.model_id + " (" + std::string(ModeName(r.mode)) + ")";
}

std::string CsvField(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Six metric columns then the total, all display-rounded.
std::vector<double> RowValues(const MetaResult& r) {
  std::vector<double> values;
  for (Metric m : kAllMetrics) {
    auto it = r.agreement.find(m);
    if (it == r.agreement.end()) {
      throw Error(ErrorKind::kMissingMetric, r.model_id + " has no rate for " + std::string(MetricName(m)));
    }
    values.push_back(RoundForDisplay(it->second));
  }
  values.push_back(RoundForDisplay(r.total_pass_rate));
  return values;
}

std::string Markdown(std::span<const MetaResult> results) {
  std::vector<std::vector<double>> rows;
  for (const MetaResult& r : results) rows.push_back(RowValues(r));
  std::vector<double> best(rows.front().size(), -1.0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) best[c] = std::max(best[c], row[c]);
  }

  std::string out = "## " + results.front().suite_name + "\n\n| judge |";
  for (Metric m : kAllMetrics) out += " " + std::string(MetricName(m)) + " |";
  out += " total |\n|---|";
  for (std::size_t c = 0; c < best.size(); ++c) out += "---:|";
  out += '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += "| " + RowLabel(results[i]) + " |";
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      const std::string cell = FormatPercent(rows[i][c]);
      out += rows[i][c] == best[c] ? " **" + cell + "** |" : " " + cell + " |";
    }
    out += '\n';
  }

  out += "\n" + GridLegend();
  for (const MetaResult& r : results) {
    const PassMatrix matrix = BuildPassMatrix(r.outcomes);
    out += "\n### " + RowLabel(r) + "\n\n```\n";
    for (Metric m : kAllMetrics) out += RenderGrid(matrix, m) + "\n";
    out += "```\n";
  }
  return out;
}

std::string Csv(std::span<const MetaResult> results) {
  std::string out = "model_id,mode";
  for (Metric m : kAllMetrics) out += "," + std::string(MetricName(m));
  out += ",total\n";
  for (const MetaResult& r : results) {
    out += CsvField(r.model_id) + "," + std::string(ModeName(r.mode));
    for (double v : RowValues(r)) out += "," + FormatPercent(v);
    out += '\n';
  }
  return out;
}

std::string Json(std::span<const MetaResult> results) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const MetaResult& r : results) {
    const std::vector<double> values = RowValues(r);
    nlohmann::ordered_json row;
    row["model_id"] = r.model_id;
    row["mode"] = std::string(ModeName(r.mode));
    nlohmann::ordered_json agreement = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < kAllMetrics.size(); ++i) {
      agreement[std::string(MetricName(kAllMetrics[i]))] = values[i];
    }
    row["agreement"] = agreement;
    row["total_pass_rate"] = values.back();
    const PassMatrix matrix = BuildPassMatrix(r.outcomes);
    nlohmann::ordered_json grids = nlohmann::ordered_json::object();
    for (Metric m : kAllMetrics) grids[std::string(MetricName(m))] = RenderGrid(matrix, m);
    row["grids"] = grids;
    row["config"] = r.config;
    rows.push_back(row);
  }
  nlohmann::ordered_json out;
  out["suite"] = results.front().suite_name;
  out["results"] = rows;
  return out.dump(2) + "\n";
}

}  // namespace

std::optional<ReportFormat> ReportFormatFromName(std::string_view name) {
  if (name == "md" || name == "markdown") return ReportFormat::kMarkdown;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "json") return ReportFormat::kJson;
  return std::nullopt;
}

std::string GridLegend() {
  std::string out = "Legend:";
  for (CellState s : {CellState::kPass, CellState::kFail, CellState::kFormatError, CellState::kSkippedPass}) {
    out += std::string(" ") + CellGlyph(s) + " " + std::string(CellStateName(s)) + ",";
  }
  out += std::string(" ") + CellGlyph(std::nullopt) + " no test\n";
  return out;
}

std::string RenderReport(std::span<const MetaResult> results, ReportFormat format) {
  if (results.empty()) throw Error(ErrorKind::kEmptyInput, "no meta results to report");
  for (const MetaResult& r : results) {
    if (r.suite_name != results.front().suite_name) {
      throw Error(ErrorKind::kMixedSuites,
                  "results span suites " + results.front().suite_name + " and " + r.suite_name);
    }
  }
  switch (format) {
    case ReportFormat::kMarkdown: return Markdown(results);
    case ReportFormat::kCsv: return Csv(results);
    case ReportFormat::kJson: return Json(results);
  }
  return "";
}

}  // namespace groundjudge
