#include "groundjudge/model.hpp"

#include <algorithm>

#include "groundjudge/error.hpp"

namespace groundjudge {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "io_error";
    case ErrorKind::kSchema: return "schema_error";
    case ErrorKind::kStructure: return "structure_error";
    case ErrorKind::kConfig: return "config_error";
    case ErrorKind::kTemplate: return "template_error";
    case ErrorKind::kMissingGroundTruth: return "missing_ground_truth";
    case ErrorKind::kTransient: return "transient_error";
    case ErrorKind::kAuth: return "auth_error";
    case ErrorKind::kRequest: return "request_error";
    case ErrorKind::kCacheMiss: return "cache_miss";
    case ErrorKind::kMissingFixture: return "missing_fixture";
    case ErrorKind::kLengthMismatch: return "length_mismatch";
    case ErrorKind::kEmptyInput: return "empty_input";
    case ErrorKind::kNoOverlap: return "no_overlap";
    case ErrorKind::kEmptyOutcomes: return "empty_outcomes";
    case ErrorKind::kMissingMetric: return "missing_metric";
    case ErrorKind::kMissingRawResponses: return "missing_raw_responses";
    case ErrorKind::kTargetExceedsPool: return "target_exceeds_pool";
    case ErrorKind::kMixedSuites: return "mixed_suites";
  }
  return "error";
}

std::string_view MetricName(Metric metric) {
  switch (metric) {
    case Metric::kAnswerRelevancy: return "answer_relevancy";
    case Metric::kCompleteness: return "completeness";
    case Metric::kUsefulness: return "usefulness";
    case Metric::kFaithfulness: return "faithfulness";
    case Metric::kPositiveAcceptance: return "positive_acceptance";
    case Metric::kNegativeRejection: return "negative_rejection";
  }
  return "";
}

std::optional<Metric> MetricFromName(std::string_view name) {
  for (Metric m : kAllMetrics) {
    if (MetricName(m) == name) return m;
  }
  return std::nullopt;
}

bool IsLikertMetric(Metric metric) {
  return metric == Metric::kAnswerRelevancy || metric == Metric::kCompleteness;
}

bool IsJudgedMetric(Metric metric) {
  return std::find(kJudgedMetrics.begin(), kJudgedMetrics.end(), metric) != kJudgedMetrics.end();
}

std::string_view CallName(JudgeCall call) {
  switch (call) {
    case JudgeCall::kAnswerRelevancy: return "answer_relevancy";
    case JudgeCall::kCompleteness: return "completeness";
    case JudgeCall::kUsefulness: return "usefulness";
    case JudgeCall::kFaithfulness: return "faithfulness";
    case JudgeCall::kCombined: return "combined";
  }
  return "";
}

std::optional<JudgeCall> CallFromName(std::string_view name) {
  for (JudgeCall c : {JudgeCall::kAnswerRelevancy, JudgeCall::kCompleteness,
                      JudgeCall::kUsefulness, JudgeCall::kFaithfulness, JudgeCall::kCombined}) {
    if (CallName(c) == name) return c;
  }
  return std::nullopt;
}

JudgeCall CallForMetric(Metric metric) {
  switch (metric) {
    case Metric::kAnswerRelevancy: return JudgeCall::kAnswerRelevancy;
    case Metric::kCompleteness: return JudgeCall::kCompleteness;
    case Metric::kUsefulness: return JudgeCall::kUsefulness;
    case Metric::kFaithfulness: return JudgeCall::kFaithfulness;
    default: break;
  }
  throw std::invalid_argument("metric " + std::string(MetricName(metric)) +
                              " is derived, not judged");
}

MetricScore MetricScore::Likert(int value) {
  auto score = TryLikert(value);
  if (!score) {
    throw Error(ErrorKind::kSchema, "likert value " + std::to_string(value) + " outside [1,5]");
  }
  return *score;
}

std::optional<MetricScore> MetricScore::TryLikert(long long value) {
  if (value < 1 || value > 5) return std::nullopt;
  return MetricScore(Kind::kLikert, static_cast<int>(value));
}

int MetricScore::likert() const {
  if (!is_likert()) throw std::logic_error("score is not likert: " + ToString());
  return value_;
}

bool MetricScore::boolean() const {
  if (!is_boolean()) throw std::logic_error("score is not boolean: " + ToString());
  return value_ != 0;
}

std::string MetricScore::ToString() const {
  switch (kind_) {
    case Kind::kLikert: return std::to_string(value_);
    case Kind::kBoolean: return value_ ? "true" : "false";
    case Kind::kNull: return "null";
    case Kind::kFormatError: return std::string(kFormatErrorToken);
  }
  return "";
}

nlohmann::json ScoreToJson(const MetricScore& score) {
  switch (score.kind()) {
    case MetricScore::Kind::kLikert: return score.likert();
    case MetricScore::Kind::kBoolean: return score.boolean();
    case MetricScore::Kind::kNull: return nullptr;
    case MetricScore::Kind::kFormatError: return std::string(kFormatErrorToken);
  }
  return nullptr;
}

std::optional<MetricScore> ScoreFromJson(const nlohmann::json& value) {
  if (value.is_null()) return MetricScore::Null();
  if (value.is_boolean()) return MetricScore::Boolean(value.get<bool>());
  if (value.is_number_integer()) return MetricScore::TryLikert(value.get<long long>());
  if (value.is_string() && value.get<std::string>() == kFormatErrorToken) {
    return MetricScore::FormatError();
  }
  return std::nullopt;
}

bool ScoreIn(const MetricScore& score, std::span<const MetricScore> expected) {
  if (score.is_format_error()) return false;
  return std::find(expected.begin(), expected.end(), score) != expected.end();
}

std::string_view SituationName(Situation situation) {
  switch (situation) {
    case Situation::kAnswerableAnswered: return "answerable_answered";
    case Situation::kAnswerableRefused: return "answerable_refused";
    case Situation::kAdversarialRefusedWithRelatedInfo: return "adversarial_refused_with_related_info";
    case Situation::kAdversarialRefusedBare: return "adversarial_refused_bare";
    case Situation::kAdversarialAnswered: return "adversarial_answered";
    case Situation::kUndetermined: return "undetermined";
  }
  return "";
}

std::optional<Situation> SituationFromName(std::string_view name) {
  for (Situation s : {Situation::kAnswerableAnswered, Situation::kAnswerableRefused,
                      Situation::kAdversarialRefusedWithRelatedInfo,
                      Situation::kAdversarialRefusedBare, Situation::kAdversarialAnswered,
                      Situation::kUndetermined}) {
    if (SituationName(s) == name) return s;
  }
  return std::nullopt;
}

AcceptanceRejection DeriveAcceptanceRejection(const MetricScore& relevancy,
                                              const MetricScore& completeness) {
  if (relevancy.is_format_error() || completeness.is_format_error()) {
    return {MetricScore::FormatError(), MetricScore::FormatError()};
  }
  const bool answerable = !completeness.is_null();
  const bool responded = !relevancy.is_null();
  if (answerable) return {MetricScore::Boolean(responded), MetricScore::Null()};
  return {MetricScore::Null(), MetricScore::Boolean(!responded)};
}

Situation InferSituation(const MetricScore& relevancy, const MetricScore& completeness,
                         const MetricScore& usefulness) {
  if (relevancy.is_format_error() || completeness.is_format_error()) {
    return Situation::kUndetermined;
  }
  const bool answerable = !completeness.is_null();
  const bool responded = !relevancy.is_null();
  if (answerable) {
    return responded ? Situation::kAnswerableAnswered : Situation::kAnswerableRefused;
  }
  if (responded) return Situation::kAdversarialAnswered;
  if (usefulness.is_format_error()) return Situation::kUndetermined;
  return usefulness.is_null() ? Situation::kAdversarialRefusedBare
                              : Situation::kAdversarialRefusedWithRelatedInfo;
}

bool IsApplicabilityConsistent(const EvaluationReport& report) {
  const auto& s = report.scores;
  auto defined = [&](Metric m) { return !s[m].is_null(); };
  auto absent = [&](Metric m) { return s[m].is_null(); };
  const bool related_info = defined(Metric::kUsefulness);

  switch (report.situation) {
    case Situation::kUndetermined:
      return true;
    case Situation::kAnswerableAnswered:
      return defined(Metric::kAnswerRelevancy) && defined(Metric::kCompleteness) &&
             absent(Metric::kUsefulness) && defined(Metric::kFaithfulness) &&
             s[Metric::kPositiveAcceptance] == MetricScore::Boolean(true) &&
             absent(Metric::kNegativeRejection);
    case Situation::kAnswerableRefused:
      return absent(Metric::kAnswerRelevancy) && defined(Metric::kCompleteness) &&
             defined(Metric::kFaithfulness) == related_info &&
             s[Metric::kPositiveAcceptance] == MetricScore::Boolean(false) &&
             absent(Metric::kNegativeRejection);
    case Situation::kAdversarialAnswered:
      return defined(Metric::kAnswerRelevancy) && absent(Metric::kCompleteness) &&
             absent(Metric::kUsefulness) && defined(Metric::kFaithfulness) &&
             absent(Metric::kPositiveAcceptance) &&
             s[Metric::kNegativeRejection] == MetricScore::Boolean(false);
    case Situation::kAdversarialRefusedWithRelatedInfo:
      return absent(Metric::kAnswerRelevancy) && absent(Metric::kCompleteness) && related_info &&
             defined(Metric::kFaithfulness) && absent(Metric::kPositiveAcceptance) &&
             s[Metric::kNegativeRejection] == MetricScore::Boolean(true);
    case Situation::kAdversarialRefusedBare:
      return absent(Metric::kAnswerRelevancy) && absent(Metric::kCompleteness) &&
             !related_info && absent(Metric::kFaithfulness) &&
             absent(Metric::kPositiveAcceptance) &&
             s[Metric::kNegativeRejection] == MetricScore::Boolean(true);
  }
  return false;
}

}  // namespace groundjudge
