#pragma once

// Finetuning traces: the combined prompt paired with the four per-metric
// judge responses of a four-call run, plus score-balanced subset selection.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "groundjudge/model.hpp"
#include "groundjudge/pipeline.hpp"
#include "groundjudge/prompt.hpp"

namespace groundjudge {

struct TraceRecord {
  std::string sample_id;
  std::string prompt;
  std::string completion;
  ScoreVector scores;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct TraceExport {
  std::vector<TraceRecord> records;
  // Samples whose completion did not parse back to the run's scores.
  std::vector<std::string> dropped;
};

/// Response text standing in for a call the pipeline skipped.
std::string SkippedCallStub(Metric metric, const PromptVariant& variant);

/// One record per run record, in run order. Responses are concatenated in
/// pipeline order, separated by a blank line. Throws
/// Error(kMissingRawResponses) for single-call runs or records missing a
/// response without a recorded call error, Error(kSchema) when a run
/// sample is absent from the samples.
TraceExport ExportTraces(std::span<const RunRecord> run, std::span<const GroundedQASample> samples,
                         const PromptVariant& variant, const TemplateSet& templates);

/// Squared distance between each metric's value histogram and the uniform
/// histogram over the values that metric takes in the pool, summed over
/// metrics.
double BalanceObjective(std::span<const TraceRecord> pool, std::span<const std::size_t> selected);

/// Greedy: repeatedly adds the record that minimizes BalanceObjective,
/// ties broken by ascending sample_id. Returns indices into pool in
/// ascending order. Throws Error(kTargetExceedsPool).
std::vector<std::size_t> BalanceSelection(std::span<const TraceRecord> pool, std::size_t target);

nlohmann::ordered_json TraceToJson(const TraceRecord& record);
void WriteTraceFile(const std::filesystem::path& path, std::span<const TraceRecord> records);

}  // namespace groundjudge
