#include "groundjudge/align.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "groundjudge/error.hpp"

namespace groundjudge {
namespace {

enum class BoolClass { kTrue, kFalse, kNull };

std::optional<BoolClass> ClassOf(const MetricScore& score) {
  if (score.is_null()) return BoolClass::kNull;
  if (score.is_boolean()) return score.boolean() ? BoolClass::kTrue : BoolClass::kFalse;
  return std::nullopt;
}

}  // namespace

std::vector<double> AverageRanks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 (0-based) share rank mean((i+1)..j).
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

std::optional<double> PearsonCorrelation(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::string_view SpearmanStatusName(SpearmanStatus status) {
  switch (status) {
    case SpearmanStatus::kOk: return "ok";
    case SpearmanStatus::kInsufficientPairs: return "insufficient_pairs";
    case SpearmanStatus::kZeroVariance: return "zero_variance";
  }
  return "";
}

SpearmanResult Spearman(std::span<const MetricScore> xs, std::span<const MetricScore> ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorKind::kLengthMismatch, std::to_string(xs.size()) + " vs " + std::to_string(ys.size()));
  }
  std::vector<double> a, b;
  SpearmanResult result;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!xs[i].is_likert() || !ys[i].is_likert()) {
      ++result.excluded;
      continue;
    }
    a.push_back(xs[i].likert());
    b.push_back(ys[i].likert());
  }
  if (a.size() < 2) {
    result.status = SpearmanStatus::kInsufficientPairs;
    return result;
  }
  const auto ra = AverageRanks(a);
  const auto rb = AverageRanks(b);
  result.value = PearsonCorrelation(ra, rb);
  result.status = result.value ? SpearmanStatus::kOk : SpearmanStatus::kZeroVariance;
  return result;
}

double MacroF1ThreeClass(std::span<const MetricScore> reference, std::span<const MetricScore> predicted) {
  if (reference.size() != predicted.size()) {
    throw Error(ErrorKind::kLengthMismatch,
                std::to_string(reference.size()) + " vs " + std::to_string(predicted.size()));
  }
  if (reference.empty()) throw Error(ErrorKind::kEmptyInput, "no pairs");

  std::array<double, 3> true_positive{}, predicted_count{}, actual_count{};
  std::array<bool, 3> present{};
  for (std::size_t i = 0; i < reference.size(); ++i) {
    auto ref = ClassOf(reference[i]);
    if (!ref) throw Error(ErrorKind::kSchema, "reference score " + reference[i].ToString() + " is not true/false/null");
    const auto r = static_cast<std::size_t>(*ref);
    actual_count[r] += 1;
    present[r] = true;
    // Likert or format-error predictions belong to no class.
    if (auto pred = ClassOf(predicted[i])) {
      const auto p = static_cast<std::size_t>(*pred);
      predicted_count[p] += 1;
      present[p] = true;
      if (p == r) true_positive[r] += 1;
    }
  }

  double sum = 0.0;
  int classes = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    if (!present[c]) continue;
    ++classes;
    const double precision = predicted_count[c] > 0 ? true_positive[c] / predicted_count[c] : 0.0;
    const double recall = actual_count[c] > 0 ? true_positive[c] / actual_count[c] : 0.0;
    sum += precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }
  return sum / classes;
}

AlignmentReport AlignRuns(std::span<const RunRecord> reference, std::span<const RunRecord> candidate) {
  std::unordered_map<std::string, const RunRecord*> by_id;
  for (const RunRecord& r : candidate) by_id.emplace(r.report.sample_id, &r);

  AlignmentReport report;
  std::vector<std::pair<const RunRecord*, const RunRecord*>> joined;
  std::unordered_map<std::string, bool> matched;
  for (const RunRecord& r : reference) {
    auto it = by_id.find(r.report.sample_id);
    if (it == by_id.end()) {
      report.unmatched_reference.push_back(r.report.sample_id);
      continue;
    }
    joined.emplace_back(&r, it->second);
    matched[r.report.sample_id] = true;
  }
  for (const RunRecord& r : candidate) {
    if (!matched.contains(r.report.sample_id)) report.unmatched_candidate.push_back(r.report.sample_id);
  }
  if (joined.empty()) throw Error(ErrorKind::kNoOverlap, "runs share no sample_id");
  report.n_samples = joined.size();

  for (Metric m : {Metric::kAnswerRelevancy, Metric::kCompleteness}) {
    std::vector<MetricScore> xs, ys;
    for (auto [ref, cand] : joined) {
      xs.push_back(ref->report.scores[m]);
      ys.push_back(cand->report.scores[m]);
    }
    report.spearman[m] = Spearman(xs, ys);
  }
  for (Metric m : {Metric::kUsefulness, Metric::kFaithfulness, Metric::kPositiveAcceptance,
                   Metric::kNegativeRejection}) {
    std::vector<MetricScore> ref_scores, pred_scores;
    std::size_t excluded = 0;
    for (auto [ref, cand] : joined) {
      if (!ClassOf(ref->report.scores[m])) {
        ++excluded;
        continue;
      }
      ref_scores.push_back(ref->report.scores[m]);
      pred_scores.push_back(cand->report.scores[m]);
    }
    report.f1_excluded[m] = excluded;
    try {
      report.macro_f1[m] = MacroF1ThreeClass(ref_scores, pred_scores);
    } catch (const Error& e) {
      report.macro_f1[m] = std::nullopt;
      report.f1_errors[m] = e.what();
    }
  }
  return report;
}

nlohmann::ordered_json AlignmentReportToJson(const AlignmentReport& report) {
  nlohmann::ordered_json out;
  out["n_samples"] = report.n_samples;
  nlohmann::ordered_json spearman = nlohmann::ordered_json::object();
  for (const auto& [m, r] : report.spearman) {
    nlohmann::ordered_json entry;
    entry["value"] = r.value ? nlohmann::ordered_json(*r.value) : nlohmann::ordered_json("undefined");
    entry["excluded"] = r.excluded;
    if (r.status != SpearmanStatus::kOk) entry["reason"] = std::string(SpearmanStatusName(r.status));
    spearman[std::string(MetricName(m))] = entry;
  }
  out["spearman"] = spearman;
  nlohmann::ordered_json f1 = nlohmann::ordered_json::object();
  for (const auto& [m, v] : report.macro_f1) {
    f1[std::string(MetricName(m))] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json("undefined");
  }
  out["macro_f1"] = f1;
  nlohmann::ordered_json excluded = nlohmann::ordered_json::object();
  for (const auto& [m, n] : report.f1_excluded) excluded[std::string(MetricName(m))] = n;
  out["macro_f1_excluded"] = excluded;
  if (!report.f1_errors.empty()) {
    nlohmann::ordered_json errors = nlohmann::ordered_json::object();
    for (const auto& [m, e] : report.f1_errors) errors[std::string(MetricName(m))] = e;
    out["macro_f1_errors"] = errors;
  }
  out["unmatched_reference"] = report.unmatched_reference;
  out["unmatched_candidate"] = report.unmatched_candidate;
  return out;
}

}  // namespace groundjudge
