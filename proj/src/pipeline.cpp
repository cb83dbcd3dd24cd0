#include "groundjudge/pipeline.hpp"

#include <algorithm>
#include <condition_variable>
#include <exception>
#include <future>
#include <mutex>
#include <sstream>
#include <thread>

#include "groundjudge/error.hpp"
#include "groundjudge/io.hpp"

namespace groundjudge {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

bool IsFatal(ErrorKind kind) { return kind == ErrorKind::kAuth || kind == ErrorKind::kConfig; }

class SampleEvaluation {
 public:
  SampleEvaluation(const GroundedQASample& sample, JudgeBackend& backend,
                   const TemplateSet& templates, const EvaluationOptions& options)
      : sample_(sample), backend_(backend), templates_(templates), options_(options) {
    report_.sample_id = sample.sample_id;
  }

  EvaluationReport RunFourCall() {
    // Render everything up front so template and ground-truth errors
    // surface before any judge call.
    std::map<Metric, std::string> prompts;
    for (Metric m : kJudgedMetrics) {
      prompts[m] = RenderMetricPrompt(m, sample_, options_.variant, templates_);
    }

    ParsedEvaluation relevancy, completeness;
    if (options_.concurrent_first_calls) {
      auto pending = std::async(std::launch::async, [&] {
        return Judge(Metric::kCompleteness, prompts[Metric::kCompleteness]);
      });
      // Drain the future even if the relevancy call throws.
      std::exception_ptr failure;
      try {
        relevancy = Judge(Metric::kAnswerRelevancy, prompts[Metric::kAnswerRelevancy]);
      } catch (...) {
        failure = std::current_exception();
      }
      try {
        completeness = pending.get();
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
      if (failure) std::rethrow_exception(failure);
    } else {
      relevancy = Judge(Metric::kAnswerRelevancy, prompts[Metric::kAnswerRelevancy]);
      completeness = Judge(Metric::kCompleteness, prompts[Metric::kCompleteness]);
    }
    Record(relevancy);
    Record(completeness);

    const MetricScore& rel = relevancy.score;
    MetricScore usefulness = MetricScore::Null();
    if (rel.is_null() || rel.is_format_error()) {
      auto parsed = Judge(Metric::kUsefulness, prompts[Metric::kUsefulness]);
      Record(parsed);
      usefulness = parsed.score;
    } else {
      Skip(Metric::kUsefulness);
    }

    if (rel.is_null() && usefulness.is_null()) {
      Skip(Metric::kFaithfulness);
    } else {
      Record(Judge(Metric::kFaithfulness, prompts[Metric::kFaithfulness]));
    }
    return Finish();
  }

  EvaluationReport RunSingleCall() {
    const std::string prompt = RenderCombinedPrompt(sample_, options_.variant, templates_);
    auto raw = Invoke(JudgeCall::kCombined, prompt);
    if (raw) {
      for (const ParsedEvaluation& parsed : ParseCombinedResponse(*raw, options_.variant)) {
        Record(parsed);
      }
    } else {
      for (Metric m : kJudgedMetrics) report_.scores[m] = MetricScore::FormatError();
    }
    return Finish();
  }

 private:
  ParsedEvaluation Judge(Metric metric, const std::string& prompt) {
    auto raw = Invoke(CallForMetric(metric), prompt);
    if (!raw) return {metric, MetricScore::FormatError(), std::nullopt, std::nullopt};
    return ParseMetricResponse(metric, *raw, options_.variant);
  }

  std::optional<std::string> Invoke(JudgeCall call, const std::string& prompt) {
    CompletionRequest request;
    request.model_id = options_.judge.model_id;
    request.prompt = prompt;
    request.temperature = options_.judge.temperature;
    request.max_output_tokens = options_.judge.max_output_tokens;
    request.request_tag = sample_.sample_id + "/" + std::string(CallName(call));
    try {
      Completion completion = backend_.Complete(request);
      std::lock_guard lock(mutex_);
      report_.raw_responses[call] = completion.text;
      report_.attempts[call] = completion.attempts;
      return std::move(completion.text);
    } catch (const Error& e) {
      if (IsFatal(e.kind())) throw;
      std::lock_guard lock(mutex_);
      report_.call_errors[call] = e.what();
      return std::nullopt;
    }
  }

  void Record(const ParsedEvaluation& parsed) {
    report_.scores[parsed.metric] = parsed.score;
    if (parsed.justification) report_.justifications[parsed.metric] = *parsed.justification;
  }

  void Skip(Metric metric) {
    report_.scores[metric] = MetricScore::Null();
    report_.skipped_calls.insert(CallForMetric(metric));
  }

  EvaluationReport Finish() {
    auto& s = report_.scores;
    const auto derived = DeriveAcceptanceRejection(s[Metric::kAnswerRelevancy], s[Metric::kCompleteness]);
    s[Metric::kPositiveAcceptance] = derived.positive_acceptance;
    s[Metric::kNegativeRejection] = derived.negative_rejection;
    report_.situation = InferSituation(s[Metric::kAnswerRelevancy], s[Metric::kCompleteness],
                                       s[Metric::kUsefulness]);
    return std::move(report_);
  }

  const GroundedQASample& sample_;
  JudgeBackend& backend_;
  const TemplateSet& templates_;
  const EvaluationOptions& options_;
  std::mutex mutex_;
  EvaluationReport report_;
};

EvaluationReport FailedReport(const GroundedQASample& sample, EvaluationMode mode,
                              const std::string& message) {
  EvaluationReport report;
  report.sample_id = sample.sample_id;
  for (Metric m : kAllMetrics) report.scores[m] = MetricScore::FormatError();
  const JudgeCall first =
      mode == EvaluationMode::kSingleCall ? JudgeCall::kCombined : JudgeCall::kAnswerRelevancy;
  report.call_errors[first] = message;
  report.situation = Situation::kUndetermined;
  return report;
}

template <typename Map, typename KeyName>
ordered_json StringMapToJson(const Map& map, KeyName key_name) {
  ordered_json out = ordered_json::object();
  for (const auto& [key, value] : map) out[std::string(key_name(key))] = value;
  return out;
}

[[noreturn]] void BadRecord(const std::string& what) {
  throw Error(ErrorKind::kSchema, "run record: " + what);
}

const json& Field(const json& object, const char* key) {
  auto it = object.find(key);
  if (it == object.end()) BadRecord(std::string("missing \"") + key + "\"");
  return *it;
}

template <typename Key, typename Parse>
Key ParseKey(const std::string& name, Parse parse) {
  auto key = parse(name);
  if (!key) BadRecord("unknown key \"" + name + "\"");
  return *key;
}

}  // namespace

std::string_view ModeName(EvaluationMode mode) {
  return mode == EvaluationMode::kFourCall ? "four_call" : "single_call";
}

std::optional<EvaluationMode> ModeFromName(std::string_view name) {
  if (name == "four_call" || name == "pipeline") return EvaluationMode::kFourCall;
  if (name == "single_call" || name == "single") return EvaluationMode::kSingleCall;
  return std::nullopt;
}

EvaluationReport EvaluateSample(const GroundedQASample& sample, JudgeBackend& backend,
                                const TemplateSet& templates, const EvaluationOptions& options) {
  SampleEvaluation evaluation(sample, backend, templates, options);
  return options.mode == EvaluationMode::kFourCall ? evaluation.RunFourCall()
                                                   : evaluation.RunSingleCall();
}

ordered_json ReportToJson(const EvaluationReport& report) {
  ordered_json scores = ordered_json::object();
  for (Metric m : kAllMetrics) scores[std::string(MetricName(m))] = ScoreToJson(report.scores[m]);
  ordered_json skipped = ordered_json::array();
  for (JudgeCall c : report.skipped_calls) skipped.push_back(std::string(CallName(c)));
  ordered_json out;
  out["sample_id"] = report.sample_id;
  out["scores"] = scores;
  out["situation"] = std::string(SituationName(report.situation));
  out["skipped_calls"] = skipped;
  out["justifications"] = StringMapToJson(report.justifications, MetricName);
  out["raw_responses"] = StringMapToJson(report.raw_responses, CallName);
  out["attempts"] = StringMapToJson(report.attempts, CallName);
  out["call_errors"] = StringMapToJson(report.call_errors, CallName);
  return out;
}

EvaluationReport ReportFromJson(const json& value) {
  if (!value.is_object()) BadRecord("expected object");
  EvaluationReport report;
  const json& id = Field(value, "sample_id");
  if (!id.is_string()) BadRecord("sample_id must be a string");
  report.sample_id = id.get<std::string>();

  const json& scores = Field(value, "scores");
  for (Metric m : kAllMetrics) {
    const json& raw = Field(scores, std::string(MetricName(m)).c_str());
    auto score = ScoreFromJson(raw);
    if (!score) BadRecord("bad score for " + std::string(MetricName(m)) + ": " + raw.dump());
    report.scores[m] = *score;
  }
  const json& situation = Field(value, "situation");
  if (!situation.is_string()) BadRecord("situation must be a string");
  report.situation = ParseKey<Situation>(situation.get<std::string>(), SituationFromName);

  const json skipped = value.value("skipped_calls", json::array());
  for (const json& c : skipped) {
    report.skipped_calls.insert(ParseKey<JudgeCall>(c.get<std::string>(), CallFromName));
  }
  const json justifications = value.value("justifications", json::object());
  for (const auto& [k, v] : justifications.items()) {
    report.justifications[ParseKey<Metric>(k, MetricFromName)] = v.get<std::string>();
  }
  const json raw = value.value("raw_responses", json::object());
  for (const auto& [k, v] : raw.items()) {
    report.raw_responses[ParseKey<JudgeCall>(k, CallFromName)] = v.get<std::string>();
  }
  const json attempts = value.value("attempts", json::object());
  for (const auto& [k, v] : attempts.items()) {
    report.attempts[ParseKey<JudgeCall>(k, CallFromName)] = v.get<int>();
  }
  const json errors = value.value("call_errors", json::object());
  for (const auto& [k, v] : errors.items()) {
    report.call_errors[ParseKey<JudgeCall>(k, CallFromName)] = v.get<std::string>();
  }
  return report;
}

ordered_json RunRecordToJson(const RunRecord& record) {
  const ordered_json report = ReportToJson(record.report);
  ordered_json out;
  out["sample_id"] = report["sample_id"];
  out["mode"] = std::string(ModeName(record.mode));
  for (const char* key : {"scores", "situation", "skipped_calls", "justifications",
                          "raw_responses", "attempts", "call_errors"}) {
    out[key] = report[key];
  }
  out["model_id"] = record.model_id;
  out["temperature"] = record.temperature;
  out["prompt_variant"] = VariantToJson(record.variant);
  return out;
}

RunRecord RunRecordFromJson(const json& value) {
  RunRecord record;
  try {
    record.report = ReportFromJson(value);
    const json& mode = Field(value, "mode");
    record.mode = ParseKey<EvaluationMode>(mode.get<std::string>(), ModeFromName);
    record.model_id = value.value("model_id", "");
    record.temperature = value.value("temperature", 0.0);
    record.variant = VariantFromJson(value.value("prompt_variant", json::object()));
  } catch (const json::exception& e) {
    BadRecord(e.what());
  }
  return record;
}

void EvaluateBatch(std::span<const GroundedQASample> samples, JudgeBackend& backend,
                   const TemplateSet& templates, const EvaluationOptions& options,
                   int parallelism, const std::function<void(const RunRecord&)>& sink) {
  if (parallelism < 1) throw Error(ErrorKind::kConfig, "parallelism must be >= 1");
  const std::size_t n = samples.size();
  std::vector<std::optional<RunRecord>> slots(n);
  std::mutex mutex;
  std::size_t next = 0;
  std::size_t emitted = 0;
  std::exception_ptr abort;

  auto worker = [&] {
    for (;;) {
      std::size_t index;
      {
        std::lock_guard lock(mutex);
        if (abort || next >= n) return;
        index = next++;
      }
      RunRecord record;
      record.mode = options.mode;
      record.model_id = options.judge.model_id;
      record.temperature = options.judge.temperature;
      record.variant = options.variant;
      try {
        record.report = EvaluateSample(samples[index], backend, templates, options);
      } catch (const Error& e) {
        if (IsFatal(e.kind())) {
          std::lock_guard lock(mutex);
          if (!abort) abort = std::current_exception();
          return;
        }
        record.report = FailedReport(samples[index], options.mode, e.what());
      } catch (const std::exception& e) {
        record.report = FailedReport(samples[index], options.mode, e.what());
      }

      std::lock_guard lock(mutex);
      slots[index] = std::move(record);
      // Single writer: release the longest ready prefix under the lock.
      while (!abort && emitted < n && slots[emitted]) {
        try {
          sink(*slots[emitted]);
        } catch (...) {
          abort = std::current_exception();
          return;
        }
        slots[emitted].reset();
        ++emitted;
      }
    }
  };

  const int workers = static_cast<int>(std::min<std::size_t>(parallelism, std::max<std::size_t>(n, 1)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  }
  if (abort) std::rethrow_exception(abort);
}

std::vector<RunRecord> EvaluateBatch(std::span<const GroundedQASample> samples,
                                     JudgeBackend& backend, const TemplateSet& templates,
                                     const EvaluationOptions& options, int parallelism) {
  std::vector<RunRecord> records;
  records.reserve(samples.size());
  EvaluateBatch(samples, backend, templates, options, parallelism,
                [&](const RunRecord& r) { records.push_back(r); });
  return records;
}

std::string RunRecordLine(const RunRecord& record) { return RunRecordToJson(record).dump() + "\n"; }

void WriteRunFile(const std::filesystem::path& path, std::span<const RunRecord> records) {
  std::string contents;
  for (const RunRecord& r : records) contents += RunRecordLine(r);
  WriteFileAtomic(path, contents);
}

std::vector<RunRecord> LoadRunFile(const std::filesystem::path& path) {
  std::istringstream in(ReadTextFile(path));
  std::vector<RunRecord> records;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json value = json::parse(line, nullptr, false);
    if (value.is_discarded()) {
      throw Error(ErrorKind::kSchema, path.string() + " line " + std::to_string(line_number) +
                                          ": invalid JSON");
    }
    try {
      records.push_back(RunRecordFromJson(value));
    } catch (const Error& e) {
      throw Error(e.kind(), path.string() + " line " + std::to_string(line_number) + ": " +
                                e.message());
    }
  }
  return records;
}

}  // namespace groundjudge
