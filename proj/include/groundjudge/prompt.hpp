#pragma once

// Judge prompt rendering and judge output parsing.
//
// Output keys follow one canonical map, shared by the rendered schema and
// the parser (N is the answer number, 1 or 2):
//   answer_N_<short>                 score
//   answer_N_justification_<short>   free-form justification
//   answer_N_cot_<step>              metric-specific reasoning fields
// where <short> is relevancy, completeness, usefulness or faithfulness.
// With the ground truth, answer 1 is the ground truth and answer 2 the
// evaluated answer; without it, the evaluated answer is the sole answer 1.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "groundjudge/model.hpp"

namespace groundjudge {

struct PromptVariant {
  bool include_ground_truth = true;
  bool include_justification = true;
  bool include_chain_of_thought = true;

  // Answer number whose score is consumed.
  int evaluated_answer() const { return include_ground_truth ? 2 : 1; }
  int answer_count() const { return include_ground_truth ? 2 : 1; }

  friend bool operator==(const PromptVariant&, const PromptVariant&) = default;
};

nlohmann::json VariantToJson(const PromptVariant& variant);
PromptVariant VariantFromJson(const nlohmann::json& value);

/// The prompt template files, loaded once and immutable afterwards.
/// Names: task_intro, metric_prompt, combined_prompt and one instruction
/// block per judged metric (answer_relevancy, completeness, usefulness,
/// faithfulness). On disk each is <name>.md.
class TemplateSet {
 public:
  static TemplateSet Defaults();
  /// Files present in dir override the defaults; absent ones keep them.
  static TemplateSet FromDirectory(const std::filesystem::path& dir);

  const std::string& Get(std::string_view name) const;
  /// SHA-256 of every template, keyed by name.
  std::map<std::string, std::string> Digests() const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

std::string_view ShortMetricKey(Metric metric);
std::string ScoreKey(Metric metric, int answer);
std::string JustificationKey(Metric metric, int answer);
/// Chain-of-thought step names for a judged metric, without prefix.
std::span<const std::string_view> ChainOfThoughtSteps(Metric metric);

/// JSON skeleton listing the keys the judge must emit for these metrics.
std::string RenderOutputSchema(std::span<const Metric> metrics, const PromptVariant& variant);

/// Throws Error(kMissingGroundTruth) when the variant needs a ground truth
/// the sample lacks, Error(kTemplate) on template defects.
std::string RenderMetricPrompt(Metric metric, const GroundedQASample& sample,
                               const PromptVariant& variant, const TemplateSet& templates);
std::string RenderCombinedPrompt(const GroundedQASample& sample, const PromptVariant& variant,
                                 const TemplateSet& templates);

struct ParsedEvaluation {
  Metric metric = Metric::kAnswerRelevancy;
  MetricScore score;
  std::optional<std::string> justification;
  // Score given to answer 1 (the ground truth) when two answers were rated.
  std::optional<MetricScore> reference_score;

  friend bool operator==(const ParsedEvaluation&, const ParsedEvaluation&) = default;
};

/// All parseable top-level JSON objects embedded in text, in order. Braces
/// that do not open a valid object are skipped.
std::vector<nlohmann::json> ExtractJsonObjects(std::string_view raw);

/// Never throws on bad input: anything unreadable becomes a format error.
ParsedEvaluation ParseMetricResponse(Metric metric, std::string_view raw,
                                     const PromptVariant& variant = {});

/// Each metric resolves independently. Accepts a single object or several
/// concatenated ones (as produced by trace export); later keys win.
std::array<ParsedEvaluation, 4> ParseCombinedResponse(std::string_view raw,
                                                      const PromptVariant& variant = {});

/// Canonical judge response carrying this score for the evaluated answer
/// (and, with two answers, the same score for the reference answer).
std::string FormatMetricResponse(Metric metric, const MetricScore& score,
                                 const PromptVariant& variant,
                                 std::string_view justification = "");

/// One response object carrying the four judged scores, in the combined
/// prompt's key format.
std::string FormatCombinedResponse(const std::array<MetricScore, 4>& scores,
                                   const PromptVariant& variant);

}  // namespace groundjudge
