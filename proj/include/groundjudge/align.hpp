#pragma once

// Agreement between two evaluation runs: Spearman rank correlation for the
// Likert metrics, three-class macro F1 for the nullable boolean metrics.

#include <map>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "groundjudge/model.hpp"
#include "groundjudge/pipeline.hpp"

namespace groundjudge {

/// 1-based ranks; tied values share the mean of the positions they span.
std::vector<double> AverageRanks(std::span<const double> values);

/// Pearson correlation; nullopt when either side has zero variance.
std::optional<double> PearsonCorrelation(std::span<const double> xs, std::span<const double> ys);

enum class SpearmanStatus { kOk, kInsufficientPairs, kZeroVariance };

struct SpearmanResult {
  std::optional<double> value;  // set iff status == kOk
  std::size_t excluded = 0;     // pairs dropped for a null or format error
  SpearmanStatus status = SpearmanStatus::kOk;
};

std::string_view SpearmanStatusName(SpearmanStatus status);

/// Pairs where either side is not a Likert score are excluded before
/// ranking. Throws Error(kLengthMismatch).
SpearmanResult Spearman(std::span<const MetricScore> xs, std::span<const MetricScore> ys);

/// Classes are true, false and null. A format error prediction misses its
/// reference class and counts toward no predicted class. The mean runs
/// over classes present in either list. Throws Error(kLengthMismatch),
/// Error(kEmptyInput), or Error(kSchema) for a reference outside the three
/// classes.
double MacroF1ThreeClass(std::span<const MetricScore> reference, std::span<const MetricScore> predicted);

struct AlignmentReport {
  std::size_t n_samples = 0;
  std::map<Metric, SpearmanResult> spearman;
  // nullopt when the metric could not be computed; see f1_errors.
  std::map<Metric, std::optional<double>> macro_f1;
  std::map<Metric, std::string> f1_errors;
  // Pairs dropped because the reference score was a format error.
  std::map<Metric, std::size_t> f1_excluded;
  std::vector<std::string> unmatched_reference;
  std::vector<std::string> unmatched_candidate;
};

/// Inner join on sample_id, in reference order. Throws Error(kNoOverlap).
AlignmentReport AlignRuns(std::span<const RunRecord> reference, std::span<const RunRecord> candidate);

nlohmann::ordered_json AlignmentReportToJson(const AlignmentReport& report);

}  // namespace groundjudge
