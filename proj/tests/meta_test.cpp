#include <gtest/gtest.h>

#include <algorithm>

#include "groundjudge/error.hpp"
#include "groundjudge/meta.hpp"
#include "test_support.hpp"

namespace groundjudge {
namespace {

const MetricScore kNull = MetricScore::Null();
const MetricScore kFE = MetricScore::FormatError();
MetricScore L(int v) { return MetricScore::Likert(v); }
MetricScore B(bool v) { return MetricScore::Boolean(v); }

const TestSuite& Desk() {
  static const TestSuite suite = LoadSuite(gjtest::DataDir() / "desk_suite.json");
  return suite;
}

const TemplateSet& Templates() {
  static const TemplateSet t = TemplateSet::Defaults();
  return t;
}

std::vector<TestOutcome> Outcomes(int n, int passing, Metric metric) {
  std::vector<TestOutcome> out(n);
  for (int i = 0; i < n; ++i) {
    for (Metric m : kAllMetrics) out[i].states[m] = CellState::kPass;
    out[i].states[metric] = i < passing ? CellState::kPass : CellState::kFail;
    out[i].set_id = 1 + i / kTestTypesPerSet;
    out[i].test_type = 1 + i % kTestTypesPerSet;
  }
  return out;
}

TEST(Agreement, Rates) {
  EXPECT_DOUBLE_EQ(MetricAgreementRate(Outcomes(144, 132, Metric::kCompleteness), Metric::kCompleteness),
                   100.0 * 132 / 144);
  EXPECT_EQ(FormatPercent(MetricAgreementRate(Outcomes(144, 132, Metric::kCompleteness), Metric::kCompleteness)),
            "91.67");
  EXPECT_EQ(MetricAgreementRate(Outcomes(144, 144, Metric::kFaithfulness), Metric::kFaithfulness), 100.0);
  EXPECT_EQ(MetricAgreementRate(Outcomes(16, 0, Metric::kUsefulness), Metric::kUsefulness), 0.0);
  EXPECT_THROW(MetricAgreementRate({}, Metric::kUsefulness), Error);
}

TEST(Agreement, SkippedPassCountsAsAgreement) {
  auto outcomes = Outcomes(4, 4, Metric::kUsefulness);
  outcomes[0].states[Metric::kUsefulness] = CellState::kSkippedPass;
  outcomes[1].states[Metric::kUsefulness] = CellState::kFormatError;
  EXPECT_EQ(MetricAgreementRate(outcomes, Metric::kUsefulness), 75.0);
}

TEST(Agreement, TotalIsUnweightedMean) {
  AgreementMap rates;
  double sum = 0.0;
  for (Metric m : kAllMetrics) {
    rates[m] = 10.0 * (static_cast<int>(m) + 1);
    sum += rates[m];
  }
  EXPECT_DOUBLE_EQ(TotalPassRate(rates), sum / 6.0);
  rates.erase(Metric::kNegativeRejection);
  try {
    TotalPassRate(rates);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingMetric);
  }
}

TEST(Display, HalfUpRounding) {
  EXPECT_EQ(FormatPercent(91.665), "91.67");
  EXPECT_EQ(FormatPercent(91.664999), "91.66");
  EXPECT_EQ(FormatPercent(100.0), "100.00");
  EXPECT_EQ(FormatPercent(0.0), "0.00");
  EXPECT_EQ(FormatPercent(100.0 * 2 / 3), "66.67");
  EXPECT_DOUBLE_EQ(RoundForDisplay(12.345), 12.35);
}

TEST(CheckMetric, States) {
  EvaluationReport r;
  r.scores[Metric::kAnswerRelevancy] = L(4);
  r.scores[Metric::kCompleteness] = kFE;
  r.scores[Metric::kUsefulness] = kNull;
  r.skipped_calls.insert(JudgeCall::kUsefulness);
  r.scores[Metric::kFaithfulness] = B(true);
  EXPECT_EQ(CheckMetric(r, Metric::kAnswerRelevancy, {L(4), L(5)}), CellState::kPass);
  EXPECT_EQ(CheckMetric(r, Metric::kAnswerRelevancy, {L(5)}), CellState::kFail);
  EXPECT_EQ(CheckMetric(r, Metric::kCompleteness, {L(5)}), CellState::kFormatError);
  EXPECT_EQ(CheckMetric(r, Metric::kCompleteness, {kNull}), CellState::kFormatError);
  EXPECT_EQ(CheckMetric(r, Metric::kUsefulness, {kNull}), CellState::kSkippedPass);
  EXPECT_EQ(CheckMetric(r, Metric::kUsefulness, {B(true)}), CellState::kFail);
  EXPECT_EQ(CheckMetric(r, Metric::kFaithfulness, {B(true)}), CellState::kPass);
  for (CellState s : {CellState::kPass, CellState::kFail, CellState::kFormatError, CellState::kSkippedPass}) {
    EXPECT_EQ(CellStateFromName(CellStateName(s)), s);
  }
}

std::map<std::string, std::string> ConstantJudge(const TestSuite& suite, std::array<MetricScore, 4> scores) {
  std::map<std::string, std::string> f;
  for (const UnitTest& t : suite.tests) {
    for (std::size_t i = 0; i < 4; ++i) {
      const Metric m = kJudgedMetrics[i];
      f[t.sample.sample_id + "/" + std::string(CallName(CallForMetric(m)))] =
          FormatMetricResponse(m, scores[i], {}, "x");
    }
  }
  return f;
}

// Agreement computed by hand from the skip rules and the expectation sets.
AgreementMap ExpectedConstantAgreement(const TestSuite& suite, std::array<MetricScore, 4> s) {
  const MetricScore rel = s[0], comp = s[1];
  const MetricScore use = rel.is_null() ? s[2] : kNull;
  const MetricScore faith = (rel.is_null() && use.is_null()) ? kNull : s[3];
  MetricScore pa = kNull, nr = kNull;
  if (comp.is_null()) {
    nr = B(rel.is_null());
  } else {
    pa = B(!rel.is_null());
  }
  const std::map<Metric, MetricScore> scores = {
      {Metric::kAnswerRelevancy, rel}, {Metric::kCompleteness, comp}, {Metric::kUsefulness, use},
      {Metric::kFaithfulness, faith}, {Metric::kPositiveAcceptance, pa}, {Metric::kNegativeRejection, nr}};
  AgreementMap out;
  for (const auto& [m, score] : scores) {
    int pass = 0;
    for (const UnitTest& t : suite.tests) {
      const auto& e = t.expectations[m];
      pass += std::find(e.begin(), e.end(), score) != e.end() ? 1 : 0;
    }
    out[m] = 100.0 * pass / static_cast<double>(suite.tests.size());
  }
  return out;
}

TEST(RunMetaSuite, ConstantJudgesMatchHandCount) {
  const std::vector<std::array<MetricScore, 4>> judges = {
      {L(5), L(5), B(true), B(true)}, {kNull, kNull, B(true), B(true)}, {kNull, kNull, kNull, B(false)},
      {L(2), kNull, kNull, B(false)}, {kNull, L(1), B(false), B(true)}, {L(3), L(3), kNull, B(true)}};
  for (const auto& judge : judges) {
    ScriptedBackend backend(ConstantJudge(Desk(), judge));
    const MetaResult result = RunMetaSuite(Desk(), backend, Templates(), {});
    const AgreementMap expected = ExpectedConstantAgreement(Desk(), judge);
    for (Metric m : kAllMetrics) {
      EXPECT_DOUBLE_EQ(result.agreement.at(m), expected.at(m)) << MetricName(m);
    }
    EXPECT_EQ(result.outcomes.size(), Desk().tests.size());
  }
}

TEST(RunMetaSuite, OracleFixturesReachFullAgreement) {
  for (EvaluationMode mode : {EvaluationMode::kFourCall, EvaluationMode::kSingleCall}) {
    ScriptedBackend backend(BuildOracleFixtures(Desk(), mode, {}));
    EvaluationOptions options;
    options.mode = mode;
    const MetaResult result = RunMetaSuite(Desk(), backend, Templates(), options, 3);
    EXPECT_EQ(result.total_pass_rate, 100.0);
    for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
      EXPECT_EQ(result.outcomes[i].set_id, Desk().tests[i].set_id);
      EXPECT_EQ(result.outcomes[i].test_type, Desk().tests[i].test_type);
    }
  }
}

TEST(PassMatrix, ShapeAndCells) {
  std::vector<TestOutcome> outcomes = Outcomes(32, 31, Metric::kFaithfulness);
  for (auto& o : outcomes) o.set_id = o.set_id == 1 ? 7 : 3;
  outcomes.erase(outcomes.begin() + 4);  // set 7, type 5
  const PassMatrix matrix = BuildPassMatrix(outcomes);
  EXPECT_EQ(matrix.set_ids, (std::vector<int>{3, 7}));
  const auto& grid = matrix.grids[Metric::kFaithfulness];
  ASSERT_EQ(grid.size(), 2u);
  EXPECT_EQ(grid[0].size(), 16u);
  EXPECT_FALSE(grid[1][4].has_value());
  EXPECT_EQ(grid[0][15], CellState::kFail);
  // Cross-check each cell against the outcome list.
  for (const TestOutcome& o : outcomes) {
    const std::size_t row = o.set_id == 3 ? 0 : 1;
    for (Metric m : kAllMetrics) EXPECT_EQ(matrix.grids[m][row][o.test_type - 1], o.states[m]);
  }
  const std::string text = RenderGrid(matrix, Metric::kFaithfulness);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
  EXPECT_EQ(std::count(text.begin(), text.end(), 'x'), 1);
  EXPECT_EQ(std::count(text.begin(), text.end(), '.'), 1);
  EXPECT_EQ(std::count(text.begin(), text.end(), 'P'), 30);
}

TEST(MetaResultJson, RoundTrip) {
  auto fixtures = BuildOracleFixtures(Desk(), EvaluationMode::kFourCall, {});
  fixtures[Desk().tests[3].sample.sample_id + "/answer_relevancy"] = "garbage";
  ScriptedBackend backend(fixtures);
  EvaluationOptions options;
  options.judge.model_id = "m1";
  MetaResult result = RunMetaSuite(Desk(), backend, Templates(), options);
  result.config["model"] = "m1";
  EXPECT_LT(result.total_pass_rate, 100.0);
  const MetaResult back = MetaResultFromJson(nlohmann::json::parse(MetaResultToJson(result).dump()));
  EXPECT_EQ(back.suite_name, "desk");
  EXPECT_EQ(back.model_id, "m1");
  EXPECT_EQ(back.mode, result.mode);
  EXPECT_EQ(back.outcomes, result.outcomes);
  EXPECT_EQ(back.agreement, result.agreement);
  EXPECT_EQ(back.total_pass_rate, result.total_pass_rate);
  EXPECT_EQ(back.config, result.config);
}

TEST(OracleFixtures, RejectsUnsatisfiableTests) {
  TestSuite suite = Desk();
  suite.tests.resize(1);
  suite.tests[0].expectations[Metric::kPositiveAcceptance] = {B(false)};
  suite.tests[0].expectations[Metric::kAnswerRelevancy] = {L(5)};
  suite.tests[0].expectations[Metric::kCompleteness] = {L(5)};
  EXPECT_THROW(BuildOracleFixtures(suite, EvaluationMode::kFourCall, {}), Error);
}

}  // namespace
}  // namespace groundjudge
