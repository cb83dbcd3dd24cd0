#include "groundjudge/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "groundjudge/align.hpp"
#include "groundjudge/backend.hpp"
#include "groundjudge/distill.hpp"
#include "groundjudge/error.hpp"
#include "groundjudge/io.hpp"
#include "groundjudge/meta.hpp"
#include "groundjudge/pipeline.hpp"
#include "groundjudge/report.hpp"
#include "groundjudge/suite.hpp"

namespace groundjudge {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

struct Flags {
  std::string samples;
  std::string suite;
  std::string backend = "remote";
  std::string endpoint;
  std::string model = "judge";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string cache_dir;
  std::string fixtures;
  std::string mode = "pipeline";
  int parallelism = 1;
  std::string templates;
  std::string out;
  std::string format = "md";
  std::string reference;
  std::string candidate;
  std::string run;
  std::optional<std::size_t> balance;
  double temperature = 0.0;
  int max_tokens = 2048;
  bool no_ground_truth = false;
  bool no_justification = false;
  bool no_cot = false;
  std::vector<std::string> inputs;
};

void RequireFile(const std::string& path, const char* flag) {
  if (path.empty()) throw Error(ErrorKind::kConfig, std::string(flag) + " is required");
  if (!fs::exists(path)) throw Error(ErrorKind::kIo, std::string(flag) + " " + path + ": no such file");
}

void RequireOut(const Flags& f) {
  if (f.out.empty()) throw Error(ErrorKind::kConfig, "--out is required");
}

PromptVariant Variant(const Flags& f) {
  return {!f.no_ground_truth, !f.no_justification, !f.no_cot};
}

TemplateSet Templates(const Flags& f) {
  return f.templates.empty() ? TemplateSet::Defaults() : TemplateSet::FromDirectory(f.templates);
}

BackendConfig Backend(const Flags& f) {
  BackendConfig config;
  if (f.backend == "remote") {
    config.kind = BackendConfig::Kind::kRemoteChat;
    config.endpoint_url = f.endpoint.empty() ? "https://api.openai.com/v1/chat/completions" : f.endpoint;
    config.api_key_env = f.api_key_env;
  } else if (f.backend == "replay") {
    config.kind = BackendConfig::Kind::kReplay;
  } else {
    config.kind = BackendConfig::Kind::kScripted;
    RequireFile(f.fixtures, "--fixtures");
    config.fixtures_path = f.fixtures;
  }
  if (!f.cache_dir.empty()) config.cache_dir = f.cache_dir;
  ValidateBackendConfig(config);
  return config;
}

EvaluationOptions Options(const Flags& f) {
  EvaluationOptions options;
  options.mode = *ModeFromName(f.mode);
  options.variant = Variant(f);
  options.judge.model_id = f.model;
  options.judge.temperature = f.temperature;
  options.judge.max_output_tokens = f.max_tokens;
  return options;
}

ordered_json ResolvedConfig(const std::string& command, const Flags& f, const TemplateSet& templates,
                            const BackendConfig* backend, const EvaluationOptions* options) {
  ordered_json config;
  config["command"] = command;
  if (backend) {
    config["backend"] = std::string(BackendKindName(backend->kind));
    if (backend->endpoint_url) config["endpoint"] = *backend->endpoint_url;
    if (backend->cache_dir) config["cache_dir"] = backend->cache_dir->string();
  }
  if (options) {
    config["model"] = options->judge.model_id;
    config["temperature"] = options->judge.temperature;
    config["max_output_tokens"] = options->judge.max_output_tokens;
    config["mode"] = std::string(ModeName(options->mode));
    config["parallelism"] = f.parallelism;
  }
  config["variant"] = VariantToJson(Variant(f));
  ordered_json digests = ordered_json::object();
  for (const auto& [name, digest] : templates.Digests()) digests[name] = digest;
  config["template_digests"] = digests;
  return config;
}

void WriteJson(const fs::path& path, const ordered_json& value) {
  WriteFileAtomic(path, value.dump(2) + "\n");
}

fs::path Sidecar(const std::string& out) { return out + ".config.json"; }

int Evaluate(const Flags& f, std::ostream& out) {
  RequireFile(f.samples, "--samples");
  RequireOut(f);
  const BackendConfig backend_config = Backend(f);
  const TemplateSet templates = Templates(f);
  const EvaluationOptions options = Options(f);
  const auto samples = LoadSamples(f.samples);
  auto backend = MakeBackend(backend_config);
  const auto records = EvaluateBatch(samples, *backend, templates, options, f.parallelism);
  WriteRunFile(f.out, records);

  ordered_json config = ResolvedConfig("evaluate", f, templates, &backend_config, &options);
  config["samples"] = records.size();
  std::size_t failed = 0;
  for (const RunRecord& r : records) failed += r.report.call_errors.empty() ? 0 : 1;
  config["samples_with_call_errors"] = failed;
  WriteJson(Sidecar(f.out), config);
  out << "wrote " << records.size() << " records to " << f.out << "\n";
  return 0;
}

int Meta(const Flags& f, std::ostream& out) {
  RequireFile(f.suite, "--suite");
  RequireOut(f);
  const BackendConfig backend_config = Backend(f);
  const TemplateSet templates = Templates(f);
  const EvaluationOptions options = Options(f);
  const TestSuite suite = LoadSuite(f.suite);
  auto backend = MakeBackend(backend_config);
  MetaResult result = RunMetaSuite(suite, *backend, templates, options, f.parallelism);
  result.config = ResolvedConfig("meta", f, templates, &backend_config, &options);
  WriteJson(f.out, MetaResultToJson(result));
  const MetaResult rows[] = {result};
  out << RenderReport(rows, ReportFormat::kMarkdown);
  return 0;
}

int Align(const Flags& f, std::ostream& out) {
  RequireFile(f.reference, "--reference");
  RequireFile(f.candidate, "--candidate");
  const auto reference = LoadRunFile(f.reference);
  const auto candidate = LoadRunFile(f.candidate);
  ordered_json report = AlignmentReportToJson(AlignRuns(reference, candidate));
  report["config"] = ResolvedConfig("align", f, TemplateSet::Defaults(), nullptr, nullptr);
  report["config"]["reference"] = f.reference;
  report["config"]["candidate"] = f.candidate;
  if (f.out.empty()) {
    out << report.dump(2) << "\n";
  } else {
    WriteJson(f.out, report);
  }
  return 0;
}

int Distill(const Flags& f, std::ostream& out) {
  const std::string run_path = !f.run.empty() ? f.run : (f.inputs.empty() ? "" : f.inputs.front());
  RequireFile(run_path, "--run");
  RequireFile(f.samples, "--samples");
  RequireOut(f);
  const TemplateSet templates = Templates(f);
  const auto run = LoadRunFile(run_path);
  const auto samples = LoadSamples(f.samples);
  TraceExport exported = ExportTraces(run, samples, Variant(f), templates);

  std::vector<TraceRecord> traces = std::move(exported.records);
  if (f.balance) {
    std::vector<TraceRecord> balanced;
    for (std::size_t i : BalanceSelection(traces, *f.balance)) balanced.push_back(traces[i]);
    traces = std::move(balanced);
  }
  WriteTraceFile(f.out, traces);

  ordered_json config = ResolvedConfig("distill", f, templates, nullptr, nullptr);
  config["run"] = run_path;
  config["records"] = traces.size();
  config["dropped"] = exported.dropped.size();
  config["dropped_samples"] = exported.dropped;
  if (f.balance) config["balance"] = *f.balance;
  WriteJson(Sidecar(f.out), config);
  out << "wrote " << traces.size() << " traces to " << f.out << " (" << exported.dropped.size()
      << " dropped)\n";
  return 0;
}

int Report(const Flags& f, std::ostream& out) {
  if (f.inputs.empty()) throw Error(ErrorKind::kConfig, "report needs at least one meta result file");
  std::vector<MetaResult> results;
  for (const std::string& path : f.inputs) {
    RequireFile(path, "meta result");
    const std::string text = ReadTextFile(path);
    const auto value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) throw Error(ErrorKind::kSchema, path + ": not valid JSON");
    results.push_back(MetaResultFromJson(value));
  }
  const std::string text = RenderReport(results, *ReportFormatFromName(f.format));
  if (f.out.empty()) {
    out << text;
  } else {
    WriteFileAtomic(f.out, text);
  }
  return 0;
}

int ExitCode(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kAuth:
      return 2;
    case ErrorKind::kIo:
      return 3;
    case ErrorKind::kSchema:
    case ErrorKind::kStructure:
    case ErrorKind::kTemplate:
    case ErrorKind::kMissingGroundTruth:
    case ErrorKind::kMissingRawResponses:
    case ErrorKind::kMixedSuites:
    case ErrorKind::kNoOverlap:
    case ErrorKind::kTargetExceedsPool:
      return 4;
    default:
      return 1;
  }
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Flags f;
  CLI::App app{"Grounded QA judge harness"};
  app.require_subcommand(1);

  auto backend_flags = [&](CLI::App* cmd) {
    cmd->add_option("--backend", f.backend)->check(CLI::IsMember({"remote", "replay", "scripted"}));
    cmd->add_option("--endpoint", f.endpoint, "Chat completion URL");
    cmd->add_option("--model", f.model);
    cmd->add_option("--api-key-env", f.api_key_env);
    cmd->add_option("--cache-dir", f.cache_dir);
    cmd->add_option("--fixtures", f.fixtures, "Scripted responses keyed by request tag");
    cmd->add_option("--mode", f.mode)->check(CLI::IsMember({"pipeline", "single"}));
    cmd->add_option("--parallelism", f.parallelism)->check(CLI::PositiveNumber);
    cmd->add_option("--temperature", f.temperature)->check(CLI::NonNegativeNumber);
    cmd->add_option("--max-tokens", f.max_tokens)->check(CLI::PositiveNumber);
  };
  auto variant_flags = [&](CLI::App* cmd) {
    cmd->add_option("--templates", f.templates);
    cmd->add_flag("--no-ground-truth", f.no_ground_truth);
    cmd->add_flag("--no-justification", f.no_justification);
    cmd->add_flag("--no-cot", f.no_cot);
  };

  CLI::App* evaluate = app.add_subcommand("evaluate", "Evaluate samples into a run file");
  evaluate->add_option("--samples", f.samples);
  evaluate->add_option("--out", f.out);
  backend_flags(evaluate);
  variant_flags(evaluate);

  CLI::App* meta = app.add_subcommand("meta", "Run the judge over a unit-test suite");
  meta->add_option("--suite", f.suite);
  meta->add_option("--out", f.out);
  backend_flags(meta);
  variant_flags(meta);

  CLI::App* align = app.add_subcommand("align", "Compare two run files");
  align->add_option("--reference", f.reference);
  align->add_option("--candidate", f.candidate);
  align->add_option("--out", f.out);

  CLI::App* distill = app.add_subcommand("distill", "Export a run as finetuning traces");
  distill->add_option("run_file", f.inputs, "Run file");
  distill->add_option("--run", f.run);
  distill->add_option("--samples", f.samples);
  distill->add_option("--out", f.out);
  distill->add_option("--balance", f.balance, "Select a score-balanced subset of this size");
  variant_flags(distill);

  CLI::App* report = app.add_subcommand("report", "Render meta results as tables and grids");
  report->add_option("results", f.inputs, "Meta result files");
  report->add_option("--format", f.format)->check(CLI::IsMember({"md", "csv", "json"}));
  report->add_option("--out", f.out);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (evaluate->parsed()) return Evaluate(f, out);
    if (meta->parsed()) return Meta(f, out);
    if (align->parsed()) return Align(f, out);
    if (distill->parsed()) return Distill(f, out);
    return Report(f, out);
  } catch (const Error& e) {
    err << "groundjudge: " << e.what() << "\n";
    return ExitCode(e.kind());
  } catch (const std::exception& e) {
    err << "groundjudge: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace groundjudge
