#pragma once

// Meta-evaluation: run a judge over a unit-test suite, check each metric
// against its expected set, aggregate agreement rates and pass matrices.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "groundjudge/model.hpp"
#include "groundjudge/pipeline.hpp"
#include "groundjudge/suite.hpp"

namespace groundjudge {

enum class CellState { kPass, kFail, kFormatError, kSkippedPass };

std::string_view CellStateName(CellState state);
std::optional<CellState> CellStateFromName(std::string_view name);

struct TestOutcome {
  int set_id = 0;
  int test_type = 0;
  MetricMap<CellState> states;
  EvaluationReport report;

  friend bool operator==(const TestOutcome&, const TestOutcome&) = default;
};

using AgreementMap = std::map<Metric, double>;

struct MetaResult {
  std::string suite_name;
  std::string model_id;
  EvaluationMode mode = EvaluationMode::kFourCall;
  std::vector<TestOutcome> outcomes;
  AgreementMap agreement;  // full precision percentages
  double total_pass_rate = 0.0;
  // Resolved run configuration echoed into the result file.
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
};

/// pass / fail / format_error, or skipped_pass when the metric's call was
/// skipped and its null score is expected.
CellState CheckMetric(const EvaluationReport& report, Metric metric, const ExpectationSet& expected);
TestOutcome CheckTest(const UnitTest& test, EvaluationReport report);

/// 100 * (pass + skipped_pass) / tests. Throws Error(kEmptyOutcomes).
double MetricAgreementRate(std::span<const TestOutcome> outcomes, Metric metric);
/// Unweighted mean of the six rates. Throws Error(kMissingMetric).
double TotalPassRate(const AgreementMap& agreement);

/// Half-up rounding to two decimals, for display.
double RoundForDisplay(double percentage);
std::string FormatPercent(double percentage);

MetaResult AggregateOutcomes(std::string suite_name, std::string model_id, EvaluationMode mode,
                             std::vector<TestOutcome> outcomes);

MetaResult RunMetaSuite(const TestSuite& suite, JudgeBackend& backend,
                        const TemplateSet& templates, const EvaluationOptions& options,
                        int parallelism = 1);

/// Per metric, a set x test-type grid. Rows follow ascending set_id,
/// columns test types 1..16; cells without a test are empty.
struct PassMatrix {
  std::vector<int> set_ids;
  MetricMap<std::vector<std::vector<std::optional<CellState>>>> grids;
};

PassMatrix BuildPassMatrix(std::span<const TestOutcome> outcomes);
/// Text grid for one metric, one row per set.
std::string RenderGrid(const PassMatrix& matrix, Metric metric);
char CellGlyph(std::optional<CellState> state);

nlohmann::ordered_json MetaResultToJson(const MetaResult& result);
MetaResult MetaResultFromJson(const nlohmann::json& value);

/// Scripted judge responses that score every test within its expected
/// sets, keyed by request tag. Throws Error(kStructure) for a test whose
/// expectations no judge could satisfy through the pipeline.
std::map<std::string, std::string> BuildOracleFixtures(const TestSuite& suite,
                                                       EvaluationMode mode,
                                                       const PromptVariant& variant);

}  // namespace groundjudge
