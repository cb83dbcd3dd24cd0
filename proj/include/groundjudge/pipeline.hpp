#pragma once

// Per-sample evaluation with call skipping, and ordered batch evaluation.
//
// Four-call mode issues relevancy and completeness, then usefulness only
// when relevancy is null, then faithfulness unless both relevancy and
// usefulness are null. A relevancy format error disables skipping for the
// remaining calls. Single-call mode issues one combined call.

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "groundjudge/backend.hpp"
#include "groundjudge/model.hpp"
#include "groundjudge/prompt.hpp"

namespace groundjudge {

enum class EvaluationMode { kFourCall, kSingleCall };

std::string_view ModeName(EvaluationMode mode);
std::optional<EvaluationMode> ModeFromName(std::string_view name);

struct JudgeSettings {
  std::string model_id = "judge";
  // Effective temperature; raise it only for providers that reject 0.
  double temperature = 0.0;
  int max_output_tokens = 2048;
};

struct EvaluationOptions {
  EvaluationMode mode = EvaluationMode::kFourCall;
  PromptVariant variant;
  JudgeSettings judge;
  // Issue the relevancy and completeness calls concurrently.
  bool concurrent_first_calls = true;
};

/// Backend failures other than kAuth and kConfig are folded into the
/// report as format errors with the failure kept in call_errors.
EvaluationReport EvaluateSample(const GroundedQASample& sample, JudgeBackend& backend,
                                const TemplateSet& templates, const EvaluationOptions& options);

struct RunRecord {
  EvaluationReport report;
  EvaluationMode mode = EvaluationMode::kFourCall;
  std::string model_id;
  double temperature = 0.0;
  PromptVariant variant;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

nlohmann::ordered_json RunRecordToJson(const RunRecord& record);
/// Throws Error(kSchema) on malformed records.
RunRecord RunRecordFromJson(const nlohmann::json& value);

nlohmann::ordered_json ReportToJson(const EvaluationReport& report);
EvaluationReport ReportFromJson(const nlohmann::json& value);

/// Evaluates with at most `parallelism` samples in flight and hands records
/// to sink in input order, from one thread at a time. A sample that fails
/// becomes a record of format errors; only kAuth/kConfig failures and sink
/// exceptions stop the batch (and are rethrown).
void EvaluateBatch(std::span<const GroundedQASample> samples, JudgeBackend& backend,
                   const TemplateSet& templates, const EvaluationOptions& options,
                   int parallelism, const std::function<void(const RunRecord&)>& sink);

std::vector<RunRecord> EvaluateBatch(std::span<const GroundedQASample> samples,
                                     JudgeBackend& backend, const TemplateSet& templates,
                                     const EvaluationOptions& options, int parallelism);

std::string RunRecordLine(const RunRecord& record);
void WriteRunFile(const std::filesystem::path& path, std::span<const RunRecord> records);
std::vector<RunRecord> LoadRunFile(const std::filesystem::path& path);

}  // namespace groundjudge
