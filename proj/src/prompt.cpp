#include "groundjudge/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "default_templates.hpp"
#include "groundjudge/error.hpp"
#include "groundjudge/io.hpp"
#include "groundjudge/template_engine.hpp"

namespace groundjudge {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 3> kRelevancySteps = {"adversarial", "answer_responds",
                                                              "irrelevant_content"};
constexpr std::array<std::string_view, 2> kCompletenessSteps = {"expected_information",
                                                                 "missing_information"};
constexpr std::array<std::string_view, 2> kUsefulnessSteps = {"adversarial",
                                                               "related_information"};
constexpr std::array<std::string_view, 1> kFaithfulnessSteps = {"sentence_analysis"};

std::string_view StepHint(std::string_view step) {
  if (step == "adversarial") return "<true if the references do not answer the question, else false>";
  if (step == "answer_responds") return "<true if the answer gives a direct response, else false>";
  if (step == "irrelevant_content") return "<statements that do not address the question>";
  if (step == "expected_information") return "<information in the references that answers the question>";
  if (step == "missing_information") return "<relevant information absent from the answer>";
  if (step == "related_information") return "<information given besides the refusal, or none>";
  if (step == "sentence_analysis") {
    return "[{\"sentence\": \"<sentence>\", \"citations\": [<reference numbers>], "
           "\"supported\": <true|false>}, ...]";
  }
  return "<...>";
}

std::string_view ScoreHint(Metric metric) {
  switch (metric) {
    case Metric::kAnswerRelevancy: return "<integer 1-5, or null if there is no direct response>";
    case Metric::kCompleteness: return "<integer 1-5, or null if the references hold no answer>";
    case Metric::kUsefulness: return "<true|false, or null if there is no additional information>";
    case Metric::kFaithfulness: return "<true|false, or null if there is no information to check>";
    default: return "";
  }
}

std::string NumberedReferences(const std::vector<std::string>& references) {
  std::string out;
  for (std::size_t i = 0; i < references.size(); ++i) {
    if (i) out += '\n';
    out += "[" + std::to_string(i + 1) + "] " + references[i];
  }
  return out;
}

TemplateContext BaseContext(const GroundedQASample& sample, const PromptVariant& variant,
                            const TemplateSet& templates) {
  if (variant.include_ground_truth && !sample.ground_truth_answer) {
    throw Error(ErrorKind::kMissingGroundTruth,
                "sample " + sample.sample_id + " has no ground_truth_answer");
  }
  TemplateContext ctx;
  ctx.variables["question"] = sample.question;
  ctx.variables["references"] = NumberedReferences(sample.references);
  if (variant.include_ground_truth) {
    ctx.variables["answer_1"] = *sample.ground_truth_answer;
    ctx.variables["answer_2"] = sample.answer;
  } else {
    ctx.variables["answer_1"] = sample.answer;
    ctx.variables["answer_2"] = "";
  }
  ctx.flags["ground_truth"] = variant.include_ground_truth;
  ctx.flags["justification"] = variant.include_justification;
  ctx.flags["cot"] = variant.include_chain_of_thought;
  ctx.partials["task_intro"] = templates.Get("task_intro");
  for (Metric m : kJudgedMetrics) {
    ctx.partials[std::string(MetricName(m))] = templates.Get(MetricName(m));
  }
  return ctx;
}

void RequireJudged(Metric metric) {
  if (!IsJudgedMetric(metric)) {
    throw std::invalid_argument(std::string(MetricName(metric)) + " has no judge prompt");
  }
}

std::string Lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<long long> IntegralValue(const json& value) {
  if (value.is_number_integer()) return value.get<long long>();
  if (value.is_number_float()) {
    const double d = value.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::fabs(d) < 1e9) {
      return static_cast<long long>(d);
    }
  }
  return std::nullopt;
}

MetricScore InterpretScore(Metric metric, const json& value) {
  if (value.is_null()) return MetricScore::Null();
  if (value.is_string()) {
    std::string s = Lower(value.get<std::string>());
    s.erase(0, s.find_first_not_of(" \t\r\n"));
    s.erase(s.find_last_not_of(" \t\r\n") + 1);
    if (s == "null" || s == "nan") return MetricScore::Null();
    return MetricScore::FormatError();
  }
  if (value.is_number_float() && std::isnan(value.get<double>())) return MetricScore::Null();
  if (IsLikertMetric(metric)) {
    if (auto n = IntegralValue(value)) {
      if (auto score = MetricScore::TryLikert(*n)) return *score;
    }
    return MetricScore::FormatError();
  }
  if (value.is_boolean()) return MetricScore::Boolean(value.get<bool>());
  if (auto n = IntegralValue(value); n && (*n == 0 || *n == 1)) {
    return MetricScore::Boolean(*n == 1);
  }
  return MetricScore::FormatError();
}

const json* FindScore(const json& object, Metric metric, int answer) {
  if (!object.is_object()) return nullptr;
  auto it = object.find(ScoreKey(metric, answer));
  if (it != object.end()) return &*it;
  // Accept the long metric name as well, e.g. answer_2_answer_relevancy.
  const std::string long_key = "answer_" + std::to_string(answer) + "_" + std::string(MetricName(metric));
  it = object.find(long_key);
  return it != object.end() ? &*it : nullptr;
}

std::optional<std::string> FindJustification(const json& object, Metric metric, int answer,
                                             bool allow_generic) {
  if (!object.is_object()) return std::nullopt;
  auto it = object.find(JustificationKey(metric, answer));
  if (it == object.end() && allow_generic) {
    it = object.find("answer_" + std::to_string(answer) + "_justification");
  }
  if (it == object.end()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  return it->dump();
}

ParsedEvaluation ParseFromObject(Metric metric, const json& object, const PromptVariant& variant,
                                 bool allow_generic_justification) {
  ParsedEvaluation parsed;
  parsed.metric = metric;
  const int evaluated = variant.evaluated_answer();
  const json* score = FindScore(object, metric, evaluated);
  parsed.score = score ? InterpretScore(metric, *score) : MetricScore::FormatError();
  parsed.justification = FindJustification(object, metric, evaluated, allow_generic_justification);
  if (variant.answer_count() == 2) {
    if (const json* reference = FindScore(object, metric, 1)) {
      parsed.reference_score = InterpretScore(metric, *reference);
    }
  }
  return parsed;
}

json MergeObjects(const std::vector<json>& objects) {
  json merged = json::object();
  for (const json& o : objects) {
    for (const auto& [key, value] : o.items()) merged[key] = value;
  }
  return merged;
}

}  // namespace

json VariantToJson(const PromptVariant& variant) {
  return {{"include_ground_truth", variant.include_ground_truth},
          {"include_justification", variant.include_justification},
          {"include_chain_of_thought", variant.include_chain_of_thought}};
}

PromptVariant VariantFromJson(const json& value) {
  PromptVariant v;
  if (!value.is_object()) return v;
  v.include_ground_truth = value.value("include_ground_truth", true);
  v.include_justification = value.value("include_justification", true);
  v.include_chain_of_thought = value.value("include_chain_of_thought", true);
  return v;
}

TemplateSet TemplateSet::Defaults() {
  TemplateSet set;
  for (const auto& [name, text] : internal::DefaultTemplates()) {
    set.templates_.emplace(std::string(name), std::string(text));
  }
  return set;
}

TemplateSet TemplateSet::FromDirectory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::kConfig, "template directory not found: " + dir.string());
  }
  TemplateSet set = Defaults();
  for (auto& [name, text] : set.templates_) {
    const auto file = dir / (name + ".md");
    if (std::filesystem::exists(file)) text = ReadTextFile(file);
  }
  return set;
}

const std::string& TemplateSet::Get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) {
    throw Error(ErrorKind::kTemplate, "no template named " + std::string(name));
  }
  return it->second;
}

std::map<std::string, std::string> TemplateSet::Digests() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, text] : templates_) out[name] = Sha256Hex(text);
  return out;
}

std::string_view ShortMetricKey(Metric metric) {
  switch (metric) {
    case Metric::kAnswerRelevancy: return "relevancy";
    case Metric::kCompleteness: return "completeness";
    case Metric::kUsefulness: return "usefulness";
    case Metric::kFaithfulness: return "faithfulness";
    default: break;
  }
  throw std::invalid_argument(std::string(MetricName(metric)) + " has no output key");
}

std::string ScoreKey(Metric metric, int answer) {
  return "answer_" + std::to_string(answer) + "_" + std::string(ShortMetricKey(metric));
}

std::string JustificationKey(Metric metric, int answer) {
  return "answer_" + std::to_string(answer) + "_justification_" +
         std::string(ShortMetricKey(metric));
}

std::span<const std::string_view> ChainOfThoughtSteps(Metric metric) {
  switch (metric) {
    case Metric::kAnswerRelevancy: return kRelevancySteps;
    case Metric::kCompleteness: return kCompletenessSteps;
    case Metric::kUsefulness: return kUsefulnessSteps;
    case Metric::kFaithfulness: return kFaithfulnessSteps;
    default: return {};
  }
}

std::string RenderOutputSchema(std::span<const Metric> metrics, const PromptVariant& variant) {
  std::vector<std::pair<std::string, std::string_view>> lines;
  for (int answer = 1; answer <= variant.answer_count(); ++answer) {
    const std::string prefix = "answer_" + std::to_string(answer) + "_";
    for (Metric m : metrics) {
      if (variant.include_chain_of_thought) {
        for (std::string_view step : ChainOfThoughtSteps(m)) {
          const std::string key = prefix + "cot_" + std::string(step);
          // Relevancy and usefulness share the adversarial step.
          if (std::none_of(lines.begin(), lines.end(), [&](auto& l) { return l.first == key; })) {
            lines.emplace_back(key, StepHint(step));
          }
        }
      }
      if (variant.include_justification) {
        lines.emplace_back(JustificationKey(m, answer), "<free-form explanation of the score>");
      }
      lines.emplace_back(ScoreKey(m, answer), ScoreHint(m));
    }
  }
  std::string out = "{\n";
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out += "  \"" + lines[i].first + "\": " + std::string(lines[i].second);
    out += i + 1 < lines.size() ? ",\n" : "\n";
  }
  out += "}";
  return out;
}

std::string RenderMetricPrompt(Metric metric, const GroundedQASample& sample,
                               const PromptVariant& variant, const TemplateSet& templates) {
  RequireJudged(metric);
  TemplateContext ctx = BaseContext(sample, variant, templates);
  ctx.partials["instructions"] = templates.Get(MetricName(metric));
  const std::array<Metric, 1> only{metric};
  ctx.variables["output_schema"] = RenderOutputSchema(only, variant);
  return RenderTemplate(templates.Get("metric_prompt"), ctx);
}

std::string RenderCombinedPrompt(const GroundedQASample& sample, const PromptVariant& variant,
                                 const TemplateSet& templates) {
  TemplateContext ctx = BaseContext(sample, variant, templates);
  ctx.variables["output_schema"] = RenderOutputSchema(kJudgedMetrics, variant);
  return RenderTemplate(templates.Get("combined_prompt"), ctx);
}

std::vector<json> ExtractJsonObjects(std::string_view raw) {
  std::vector<json> objects;
  std::size_t pos = 0;
  while ((pos = raw.find('{', pos)) != std::string_view::npos) {
    // Find the brace that balances this one, honouring string literals.
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t end = std::string_view::npos;
    for (std::size_t i = pos; i < raw.size(); ++i) {
      const char c = raw[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        end = i;
        break;
      }
    }
    if (end == std::string_view::npos) {
      ++pos;
      continue;
    }
    json parsed = json::parse(raw.begin() + pos, raw.begin() + end + 1, nullptr,
                              /*allow_exceptions=*/false, /*ignore_comments=*/true);
    if (!parsed.is_discarded() && parsed.is_object()) {
      objects.push_back(std::move(parsed));
      pos = end + 1;
    } else {
      ++pos;
    }
  }
  return objects;
}

ParsedEvaluation ParseMetricResponse(Metric metric, std::string_view raw,
                                     const PromptVariant& variant) {
  RequireJudged(metric);
  return ParseFromObject(metric, MergeObjects(ExtractJsonObjects(raw)), variant, true);
}

std::array<ParsedEvaluation, 4> ParseCombinedResponse(std::string_view raw,
                                                      const PromptVariant& variant) {
  const json merged = MergeObjects(ExtractJsonObjects(raw));
  std::array<ParsedEvaluation, 4> out;
  for (std::size_t i = 0; i < kJudgedMetrics.size(); ++i) {
    out[i] = ParseFromObject(kJudgedMetrics[i], merged, variant, false);
  }
  return out;
}

std::string FormatMetricResponse(Metric metric, const MetricScore& score,
                                 const PromptVariant& variant, std::string_view justification) {
  RequireJudged(metric);
  if (score.is_format_error()) return "The evaluation could not be completed.";
  json out = json::object();
  for (int answer = 1; answer <= variant.answer_count(); ++answer) {
    const std::string prefix = "answer_" + std::to_string(answer) + "_";
    if (variant.include_chain_of_thought) {
      for (std::string_view step : ChainOfThoughtSteps(metric)) {
        out[prefix + "cot_" + std::string(step)] =
            step == "sentence_analysis" ? json::array() : json("");
      }
    }
    if (variant.include_justification) {
      out[JustificationKey(metric, answer)] = std::string(justification);
    }
    out[ScoreKey(metric, answer)] = ScoreToJson(score);
  }
  return out.dump(2);
}

std::string FormatCombinedResponse(const std::array<MetricScore, 4>& scores,
                                   const PromptVariant& variant) {
  json merged = json::object();
  for (std::size_t i = 0; i < kJudgedMetrics.size(); ++i) {
    if (scores[i].is_format_error()) continue;
    merged.update(json::parse(FormatMetricResponse(kJudgedMetrics[i], scores[i], variant)));
  }
  return merged.dump(2);
}

}  // namespace groundjudge
