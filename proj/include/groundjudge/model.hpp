#pragma once

// Score lattice, grounded QA samples, evaluation reports and the
// judge-free derivations (acceptance/rejection, situation inference).

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace groundjudge {

enum class Metric : std::uint8_t {
  kAnswerRelevancy,
  kCompleteness,
  kUsefulness,
  kFaithfulness,
  kPositiveAcceptance,
  kNegativeRejection,
};

inline constexpr std::size_t kMetricCount = 6;

inline constexpr std::array<Metric, kMetricCount> kAllMetrics = {
    Metric::kAnswerRelevancy, Metric::kCompleteness,       Metric::kUsefulness,
    Metric::kFaithfulness,    Metric::kPositiveAcceptance, Metric::kNegativeRejection,
};

// The four metrics that are scored by a judge call, in pipeline order.
inline constexpr std::array<Metric, 4> kJudgedMetrics = {
    Metric::kAnswerRelevancy, Metric::kCompleteness, Metric::kUsefulness, Metric::kFaithfulness};

std::string_view MetricName(Metric metric);
std::optional<Metric> MetricFromName(std::string_view name);
bool IsLikertMetric(Metric metric);
bool IsJudgedMetric(Metric metric);

// A judge invocation. The four per-metric calls share the metric names;
// kCombined is the single-prompt call.
enum class JudgeCall : std::uint8_t {
  kAnswerRelevancy,
  kCompleteness,
  kUsefulness,
  kFaithfulness,
  kCombined,
};

std::string_view CallName(JudgeCall call);
std::optional<JudgeCall> CallFromName(std::string_view name);
JudgeCall CallForMetric(Metric metric);

/// A value in the score lattice: Likert 1-5, boolean, null (metric not
/// applicable) or format error (judge output could not be parsed).
class MetricScore {
 public:
  enum class Kind : std::uint8_t { kLikert, kBoolean, kNull, kFormatError };

  constexpr MetricScore() = default;

  /// Throws Error(kSchema) when value is outside [1, 5].
  static MetricScore Likert(int value);
  static std::optional<MetricScore> TryLikert(long long value);
  static constexpr MetricScore Boolean(bool value) {
    return MetricScore(Kind::kBoolean, value ? 1 : 0);
  }
  static constexpr MetricScore Null() { return MetricScore(); }
  static constexpr MetricScore FormatError() { return MetricScore(Kind::kFormatError, 0); }

  constexpr Kind kind() const { return kind_; }
  constexpr bool is_likert() const { return kind_ == Kind::kLikert; }
  constexpr bool is_boolean() const { return kind_ == Kind::kBoolean; }
  constexpr bool is_null() const { return kind_ == Kind::kNull; }
  constexpr bool is_format_error() const { return kind_ == Kind::kFormatError; }

  int likert() const;
  bool boolean() const;

  // Structural equality. Expectation matching goes through ScoreIn, where
  // a format error never matches anything.
  friend constexpr bool operator==(const MetricScore&, const MetricScore&) = default;
  friend bool operator<(const MetricScore& a, const MetricScore& b) {
    return a.kind_ != b.kind_ ? a.kind_ < b.kind_ : a.value_ < b.value_;
  }

  std::string ToString() const;

 private:
  constexpr MetricScore(Kind kind, int value) : kind_(kind), value_(value) {}

  Kind kind_ = Kind::kNull;
  int value_ = 0;
};

inline constexpr std::string_view kFormatErrorToken = "FORMAT_ERROR";

// likert -> integer, boolean -> true/false, null -> null,
// format error -> "FORMAT_ERROR".
nlohmann::json ScoreToJson(const MetricScore& score);
/// Inverse of ScoreToJson; nullopt for anything that is not a lattice value.
std::optional<MetricScore> ScoreFromJson(const nlohmann::json& value);

/// Fixed-size map keyed by Metric.
template <typename T>
class MetricMap {
 public:
  T& operator[](Metric metric) { return values_[static_cast<std::size_t>(metric)]; }
  const T& operator[](Metric metric) const { return values_[static_cast<std::size_t>(metric)]; }

  friend bool operator==(const MetricMap&, const MetricMap&) = default;

 private:
  std::array<T, kMetricCount> values_{};
};

using ScoreVector = MetricMap<MetricScore>;
using ExpectationSet = std::vector<MetricScore>;

/// True iff score equals one of the expected values. Format errors never pass.
bool ScoreIn(const MetricScore& score, std::span<const MetricScore> expected);

struct GroundedQASample {
  std::string sample_id;
  std::string question;
  std::vector<std::string> references;  // cited as [1], [2], ...
  std::string answer;
  std::optional<std::string> ground_truth_answer;

  friend bool operator==(const GroundedQASample&, const GroundedQASample&) = default;
};

enum class Situation : std::uint8_t {
  kAnswerableAnswered,
  kAnswerableRefused,
  kAdversarialRefusedWithRelatedInfo,
  kAdversarialRefusedBare,
  kAdversarialAnswered,
  kUndetermined,
};

std::string_view SituationName(Situation situation);
std::optional<Situation> SituationFromName(std::string_view name);

struct AcceptanceRejection {
  MetricScore positive_acceptance;
  MetricScore negative_rejection;
};

// Nullness of relevancy tells whether the answer responds; nullness of
// completeness tells whether the references hold an answer.
AcceptanceRejection DeriveAcceptanceRejection(const MetricScore& relevancy,
                                              const MetricScore& completeness);

Situation InferSituation(const MetricScore& relevancy, const MetricScore& completeness,
                         const MetricScore& usefulness);

struct EvaluationReport {
  std::string sample_id;
  ScoreVector scores;
  std::map<Metric, std::string> justifications;
  std::map<JudgeCall, std::string> raw_responses;
  std::map<JudgeCall, int> attempts;
  // Backend failures that turned a call's metrics into format errors.
  std::map<JudgeCall, std::string> call_errors;
  std::set<JudgeCall> skipped_calls;
  Situation situation = Situation::kUndetermined;

  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

/// Checks that the null pattern of a report matches the metric
/// applicability rules for its inferred situation. Undetermined reports
/// are vacuously consistent.
bool IsApplicabilityConsistent(const EvaluationReport& report);

}  // namespace groundjudge
