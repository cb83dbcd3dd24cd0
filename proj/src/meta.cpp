#include "groundjudge/meta.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "groundjudge/error.hpp"

namespace groundjudge {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string TagFor(const UnitTest& test, JudgeCall call) {
  return test.sample.sample_id + "/" + std::string(CallName(call));
}

bool Contains(const ExpectationSet& set, const MetricScore& score) {
  return std::find(set.begin(), set.end(), score) != set.end();
}

struct OracleChoice {
  MetricScore relevancy, completeness, usefulness, faithfulness;
  bool usefulness_called = false;
  bool faithfulness_called = false;
};

std::optional<OracleChoice> ChooseOracleScores(const UnitTest& test, EvaluationMode mode) {
  const auto& e = test.expectations;
  for (const MetricScore& r : e[Metric::kAnswerRelevancy]) {
    for (const MetricScore& c : e[Metric::kCompleteness]) {
      const auto derived = DeriveAcceptanceRejection(r, c);
      if (!ScoreIn(derived.positive_acceptance, e[Metric::kPositiveAcceptance]) ||
          !ScoreIn(derived.negative_rejection, e[Metric::kNegativeRejection])) {
        continue;
      }
      OracleChoice choice{r, c, MetricScore::Null(), MetricScore::Null()};
      if (mode == EvaluationMode::kSingleCall) {
        choice.usefulness = e[Metric::kUsefulness].front();
        choice.faithfulness = e[Metric::kFaithfulness].front();
        return choice;
      }
      // Four-call: the pipeline decides which calls happen.
      std::vector<MetricScore> usefulness_options;
      if (r.is_null()) {
        usefulness_options = e[Metric::kUsefulness];
      } else if (Contains(e[Metric::kUsefulness], MetricScore::Null())) {
        usefulness_options = {MetricScore::Null()};
      }
      for (const MetricScore& u : usefulness_options) {
        const bool faith_called = !(r.is_null() && u.is_null());
        if (!faith_called && !Contains(e[Metric::kFaithfulness], MetricScore::Null())) continue;
        choice.usefulness = u;
        choice.usefulness_called = r.is_null();
        choice.faithfulness_called = faith_called;
        choice.faithfulness = faith_called ? e[Metric::kFaithfulness].front() : MetricScore::Null();
        return choice;
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::string_view CellStateName(CellState state) {
  switch (state) {
    case CellState::kPass: return "pass";
    case CellState::kFail: return "fail";
    case CellState::kFormatError: return "format_error";
    case CellState::kSkippedPass: return "skipped_pass";
  }
  return "";
}

std::optional<CellState> CellStateFromName(std::string_view name) {
  for (CellState s : {CellState::kPass, CellState::kFail, CellState::kFormatError,
                      CellState::kSkippedPass}) {
    if (CellStateName(s) == name) return s;
  }
  return std::nullopt;
}

CellState CheckMetric(const EvaluationReport& report, Metric metric, const ExpectationSet& expected) {
  const MetricScore& score = report.scores[metric];
  if (score.is_format_error()) return CellState::kFormatError;
  if (!ScoreIn(score, expected)) return CellState::kFail;
  if (IsJudgedMetric(metric) && report.skipped_calls.contains(CallForMetric(metric))) {
    return CellState::kSkippedPass;
  }
  return CellState::kPass;
}

TestOutcome CheckTest(const UnitTest& test, EvaluationReport report) {
  TestOutcome outcome;
  outcome.set_id = test.set_id;
  outcome.test_type = test.test_type;
  for (Metric m : kAllMetrics) outcome.states[m] = CheckMetric(report, m, test.expectations[m]);
  outcome.report = std::move(report);
  return outcome;
}

double MetricAgreementRate(std::span<const TestOutcome> outcomes, Metric metric) {
  if (outcomes.empty()) throw Error(ErrorKind::kEmptyOutcomes, "no outcomes to aggregate");
  const auto passed = std::count_if(outcomes.begin(), outcomes.end(), [&](const TestOutcome& o) {
    const CellState s = o.states[metric];
    return s == CellState::kPass || s == CellState::kSkippedPass;
  });
  return 100.0 * static_cast<double>(passed) / static_cast<double>(outcomes.size());
}

double TotalPassRate(const AgreementMap& agreement) {
  double sum = 0.0;
  for (Metric m : kAllMetrics) {
    auto it = agreement.find(m);
    if (it == agreement.end()) {
      throw Error(ErrorKind::kMissingMetric, "no agreement rate for " + std::string(MetricName(m)));
    }
    sum += it->second;
  }
  return sum / static_cast<double>(kMetricCount);
}

double RoundForDisplay(double percentage) {
  // The epsilon absorbs representation error such as 91.665 -> 91.66499...
  return std::floor(percentage * 100.0 + 0.5 + 1e-7) / 100.0;
}

std::string FormatPercent(double percentage) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", RoundForDisplay(percentage));
  return buf;
}

MetaResult AggregateOutcomes(std::string suite_name, std::string model_id, EvaluationMode mode,
                             std::vector<TestOutcome> outcomes) {
  MetaResult result;
  result.suite_name = std::move(suite_name);
  result.model_id = std::move(model_id);
  result.mode = mode;
  result.outcomes = std::move(outcomes);
  for (Metric m : kAllMetrics) result.agreement[m] = MetricAgreementRate(result.outcomes, m);
  result.total_pass_rate = TotalPassRate(result.agreement);
  return result;
}

MetaResult RunMetaSuite(const TestSuite& suite, JudgeBackend& backend,
                        const TemplateSet& templates, const EvaluationOptions& options,
                        int parallelism) {
  std::vector<GroundedQASample> samples;
  samples.reserve(suite.tests.size());
  for (const UnitTest& t : suite.tests) samples.push_back(t.sample);

  std::vector<TestOutcome> outcomes;
  outcomes.reserve(suite.tests.size());
  std::size_t index = 0;
  EvaluateBatch(samples, backend, templates, options, parallelism, [&](const RunRecord& record) {
    outcomes.push_back(CheckTest(suite.tests[index++], record.report));
  });
  return AggregateOutcomes(suite.name, options.judge.model_id, options.mode, std::move(outcomes));
}

PassMatrix BuildPassMatrix(std::span<const TestOutcome> outcomes) {
  PassMatrix matrix;
  for (const TestOutcome& o : outcomes) matrix.set_ids.push_back(o.set_id);
  std::sort(matrix.set_ids.begin(), matrix.set_ids.end());
  matrix.set_ids.erase(std::unique(matrix.set_ids.begin(), matrix.set_ids.end()),
                       matrix.set_ids.end());
  for (Metric m : kAllMetrics) {
    matrix.grids[m].assign(matrix.set_ids.size(),
                           std::vector<std::optional<CellState>>(kTestTypesPerSet));
  }
  for (const TestOutcome& o : outcomes) {
    if (o.test_type < 1 || o.test_type > kTestTypesPerSet) continue;
    const auto row = static_cast<std::size_t>(
        std::lower_bound(matrix.set_ids.begin(), matrix.set_ids.end(), o.set_id) -
        matrix.set_ids.begin());
    for (Metric m : kAllMetrics) matrix.grids[m][row][o.test_type - 1] = o.states[m];
  }
  return matrix;
}

char CellGlyph(std::optional<CellState> state) {
  if (!state) return '.';
  switch (*state) {
    case CellState::kPass: return 'P';
    case CellState::kFail: return 'x';
    case CellState::kFormatError: return '!';
    case CellState::kSkippedPass: return '/';
  }
  return '?';
}

std::string RenderGrid(const PassMatrix& matrix, Metric metric) {
  std::string out = std::string(MetricName(metric)) + "\n";
  out += "set\\type";
  for (int t = 1; t <= kTestTypesPerSet; ++t) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), " %2d", t);
    out += buf;
  }
  out += '\n';
  const auto& grid = matrix.grids[metric];
  for (std::size_t row = 0; row < matrix.set_ids.size(); ++row) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%8d", matrix.set_ids[row]);
    out += buf;
    for (const auto& cell : grid[row]) {
      out += "  ";
      out += CellGlyph(cell);
    }
    out += '\n';
  }
  return out;
}

ordered_json MetaResultToJson(const MetaResult& result) {
  ordered_json out;
  out["suite"] = result.suite_name;
  out["model_id"] = result.model_id;
  out["mode"] = std::string(ModeName(result.mode));
  ordered_json agreement = ordered_json::object();
  for (const auto& [m, rate] : result.agreement) agreement[std::string(MetricName(m))] = rate;
  out["agreement"] = agreement;
  out["total_pass_rate"] = result.total_pass_rate;

  const PassMatrix matrix = BuildPassMatrix(result.outcomes);
  ordered_json grids = ordered_json::object();
  for (Metric m : kAllMetrics) {
    ordered_json rows = ordered_json::array();
    for (const auto& row : matrix.grids[m]) {
      ordered_json cells = ordered_json::array();
      for (const auto& cell : row) {
        cells.push_back(cell ? ordered_json(std::string(CellStateName(*cell))) : ordered_json());
      }
      rows.push_back(cells);
    }
    grids[std::string(MetricName(m))] = rows;
  }
  out["matrix"] = grids;
  out["matrix_sets"] = matrix.set_ids;

  ordered_json outcomes = ordered_json::array();
  for (const TestOutcome& o : result.outcomes) {
    ordered_json states = ordered_json::object();
    for (Metric m : kAllMetrics) states[std::string(MetricName(m))] = std::string(CellStateName(o.states[m]));
    ordered_json entry;
    entry["set_id"] = o.set_id;
    entry["test_type"] = o.test_type;
    entry["states"] = states;
    entry["report"] = ReportToJson(o.report);
    outcomes.push_back(entry);
  }
  out["outcomes"] = outcomes;
  out["config"] = result.config;
  return out;
}

MetaResult MetaResultFromJson(const json& value) {
  MetaResult result;
  try {
    result.suite_name = value.at("suite").get<std::string>();
    result.model_id = value.at("model_id").get<std::string>();
    auto mode = ModeFromName(value.at("mode").get<std::string>());
    if (!mode) throw Error(ErrorKind::kSchema, "meta result: unknown mode");
    result.mode = *mode;
    for (const auto& [k, v] : value.at("agreement").items()) {
      auto metric = MetricFromName(k);
      if (!metric) throw Error(ErrorKind::kSchema, "meta result: unknown metric " + k);
      result.agreement[*metric] = v.get<double>();
    }
    result.total_pass_rate = value.at("total_pass_rate").get<double>();
    for (const json& entry : value.value("outcomes", json::array())) {
      TestOutcome o;
      o.set_id = entry.at("set_id").get<int>();
      o.test_type = entry.at("test_type").get<int>();
      for (Metric m : kAllMetrics) {
        auto state = CellStateFromName(entry.at("states").at(std::string(MetricName(m))).get<std::string>());
        if (!state) throw Error(ErrorKind::kSchema, "meta result: unknown cell state");
        o.states[m] = *state;
      }
      o.report = ReportFromJson(entry.at("report"));
      result.outcomes.push_back(std::move(o));
    }
    if (auto it = value.find("config"); it != value.end()) result.config = *it;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchema, std::string("meta result: ") + e.what());
  }
  return result;
}

std::map<std::string, std::string> BuildOracleFixtures(const TestSuite& suite,
                                                       EvaluationMode mode,
                                                       const PromptVariant& variant) {
  std::map<std::string, std::string> fixtures;
  for (const UnitTest& test : suite.tests) {
    auto choice = ChooseOracleScores(test, mode);
    if (!choice) {
      throw Error(ErrorKind::kStructure, "set " + std::to_string(test.set_id) + ", type " +
                                             std::to_string(test.test_type) +
                                             ": no score assignment satisfies the expectations");
    }
    if (mode == EvaluationMode::kSingleCall) {
      fixtures[TagFor(test, JudgeCall::kCombined)] = FormatCombinedResponse(
          {choice->relevancy, choice->completeness, choice->usefulness, choice->faithfulness},
          variant);
      continue;
    }
    fixtures[TagFor(test, JudgeCall::kAnswerRelevancy)] =
        FormatMetricResponse(Metric::kAnswerRelevancy, choice->relevancy, variant, "oracle");
    fixtures[TagFor(test, JudgeCall::kCompleteness)] =
        FormatMetricResponse(Metric::kCompleteness, choice->completeness, variant, "oracle");
    if (choice->usefulness_called) {
      fixtures[TagFor(test, JudgeCall::kUsefulness)] =
          FormatMetricResponse(Metric::kUsefulness, choice->usefulness, variant, "oracle");
    }
    if (choice->faithfulness_called) {
      fixtures[TagFor(test, JudgeCall::kFaithfulness)] =
          FormatMetricResponse(Metric::kFaithfulness, choice->faithfulness, variant, "oracle");
    }
  }
  return fixtures;
}

}  // namespace groundjudge
