#include "groundjudge/distill.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "groundjudge/error.hpp"
#include "groundjudge/io.hpp"

namespace groundjudge {
namespace {

// Per metric: the distinct values seen in the pool, and each record's
// index into that list.
struct Histograms {
  MetricMap<std::vector<MetricScore>> values;
  MetricMap<std::vector<std::size_t>> bucket;  // bucket[m][record]
};

Histograms IndexPool(std::span<const TraceRecord> pool) {
  Histograms h;
  for (Metric m : kAllMetrics) {
    for (const TraceRecord& r : pool) {
      const MetricScore& s = r.scores[m];
      if (std::find(h.values[m].begin(), h.values[m].end(), s) == h.values[m].end()) {
        h.values[m].push_back(s);
      }
    }
    std::sort(h.values[m].begin(), h.values[m].end());
    for (const TraceRecord& r : pool) {
      h.bucket[m].push_back(static_cast<std::size_t>(
          std::lower_bound(h.values[m].begin(), h.values[m].end(), r.scores[m]) -
          h.values[m].begin()));
    }
  }
  return h;
}

double Deviation(const MetricMap<std::vector<double>>& counts, double selected,
                 const Histograms& h) {
  double total = 0.0;
  for (Metric m : kAllMetrics) {
    if (h.values[m].empty()) continue;
    const double uniform = selected / static_cast<double>(h.values[m].size());
    for (double c : counts[m]) total += (c - uniform) * (c - uniform);
  }
  return total;
}

}  // namespace

std::string SkippedCallStub(Metric metric, const PromptVariant& variant) {
  return FormatMetricResponse(metric, MetricScore::Null(), variant,
                              "Not applicable: the pipeline skipped this evaluation.");
}

TraceExport ExportTraces(std::span<const RunRecord> run, std::span<const GroundedQASample> samples,
                         const PromptVariant& variant, const TemplateSet& templates) {
  std::unordered_map<std::string, const GroundedQASample*> by_id;
  for (const GroundedQASample& s : samples) by_id.emplace(s.sample_id, &s);

  TraceExport out;
  for (const RunRecord& record : run) {
    const EvaluationReport& report = record.report;
    if (record.mode != EvaluationMode::kFourCall) {
      throw Error(ErrorKind::kMissingRawResponses,
                  "sample " + report.sample_id + " comes from a single-call run");
    }
    auto sample = by_id.find(report.sample_id);
    if (sample == by_id.end()) {
      throw Error(ErrorKind::kSchema, "sample " + report.sample_id + " not in the sample file");
    }

    std::string completion;
    bool usable = true;
    for (Metric m : kJudgedMetrics) {
      const JudgeCall call = CallForMetric(m);
      std::string part;
      if (report.skipped_calls.contains(call)) {
        part = SkippedCallStub(m, variant);
      } else if (auto raw = report.raw_responses.find(call); raw != report.raw_responses.end()) {
        part = raw->second;
      } else if (report.call_errors.contains(call)) {
        usable = false;
        break;
      } else {
        throw Error(ErrorKind::kMissingRawResponses,
                    "sample " + report.sample_id + " has no raw response for " +
                        std::string(CallName(call)));
      }
      if (!completion.empty()) completion += "\n\n";
      completion += part;
    }

    // The completion must parse back to exactly the recorded, well-formed scores.
    if (usable) {
      const auto parsed = ParseCombinedResponse(completion, variant);
      for (const ParsedEvaluation& p : parsed) {
        const MetricScore& recorded = report.scores[p.metric];
        if (recorded.is_format_error() || p.score != recorded) usable = false;
      }
    }
    if (!usable) {
      out.dropped.push_back(report.sample_id);
      continue;
    }
    TraceRecord trace;
    trace.sample_id = report.sample_id;
    trace.prompt = RenderCombinedPrompt(*sample->second, variant, templates);
    trace.completion = std::move(completion);
    trace.scores = report.scores;
    out.records.push_back(std::move(trace));
  }
  return out;
}

double BalanceObjective(std::span<const TraceRecord> pool, std::span<const std::size_t> selected) {
  const Histograms h = IndexPool(pool);
  MetricMap<std::vector<double>> counts;
  for (Metric m : kAllMetrics) counts[m].assign(h.values[m].size(), 0.0);
  for (std::size_t i : selected) {
    for (Metric m : kAllMetrics) counts[m][h.bucket[m][i]] += 1.0;
  }
  return Deviation(counts, static_cast<double>(selected.size()), h);
}

std::vector<std::size_t> BalanceSelection(std::span<const TraceRecord> pool, std::size_t target) {
  if (target > pool.size()) {
    throw Error(ErrorKind::kTargetExceedsPool,
                std::to_string(target) + " requested from a pool of " + std::to_string(pool.size()));
  }
  const Histograms h = IndexPool(pool);
  MetricMap<std::vector<double>> counts;
  for (Metric m : kAllMetrics) counts[m].assign(h.values[m].size(), 0.0);

  // Candidates visited in sample_id order so the first minimum wins ties.
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pool[a].sample_id < pool[b].sample_id;
  });

  std::vector<bool> taken(pool.size(), false);
  std::vector<std::size_t> selected;
  for (std::size_t step = 1; step <= target; ++step) {
    std::size_t best = pool.size();
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t i : order) {
      if (taken[i]) continue;
      for (Metric m : kAllMetrics) counts[m][h.bucket[m][i]] += 1.0;
      const double score = Deviation(counts, static_cast<double>(step), h);
      for (Metric m : kAllMetrics) counts[m][h.bucket[m][i]] -= 1.0;
      if (score < best_score) {
        best_score = score;
        best = i;
      }
    }
    taken[best] = true;
    selected.push_back(best);
    for (Metric m : kAllMetrics) counts[m][h.bucket[m][best]] += 1.0;
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

nlohmann::ordered_json TraceToJson(const TraceRecord& record) {
  nlohmann::ordered_json scores = nlohmann::ordered_json::object();
  for (Metric m : kAllMetrics) scores[std::string(MetricName(m))] = ScoreToJson(record.scores[m]);
  nlohmann::ordered_json out;
  out["prompt"] = record.prompt;
  out["completion"] = record.completion;
  out["sample_id"] = record.sample_id;
  out["scores"] = scores;
  return out;
}

void WriteTraceFile(const std::filesystem::path& path, std::span<const TraceRecord> records) {
  std::string contents;
  for (const TraceRecord& r : records) contents += TraceToJson(r).dump() + "\n";
  WriteFileAtomic(path, contents);
}

}  // namespace groundjudge
