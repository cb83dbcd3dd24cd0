#include <gtest/gtest.h>

#include <set>

#include "groundjudge/distill.hpp"
#include "groundjudge/error.hpp"
#include "test_support.hpp"

namespace groundjudge {
namespace {

const MetricScore kNull = MetricScore::Null();
MetricScore L(int v) { return MetricScore::Likert(v); }
MetricScore B(bool v) { return MetricScore::Boolean(v); }

const TemplateSet& Templates() {
  static const TemplateSet t = TemplateSet::Defaults();
  return t;
}

GroundedQASample Sample(std::string id) {
  return {std::move(id), "Who?", {"Doc one.", "Doc two."}, "Someone [1].", std::string("Someone.")};
}

void AddFixtures(std::map<std::string, std::string>& f, const std::string& id, std::array<MetricScore, 4> scores) {
  for (std::size_t i = 0; i < 4; ++i) {
    const Metric m = kJudgedMetrics[i];
    f[id + "/" + std::string(CallName(CallForMetric(m)))] = FormatMetricResponse(m, scores[i], {}, "because");
  }
}

struct Fixture {
  std::vector<GroundedQASample> samples;
  std::vector<RunRecord> run;
};

Fixture JudgeRun(const std::vector<std::array<MetricScore, 4>>& judges, EvaluationMode mode = EvaluationMode::kFourCall,
            std::map<std::string, std::string> overrides = {}) {
  Fixture out;
  std::map<std::string, std::string> fixtures;
  for (std::size_t i = 0; i < judges.size(); ++i) {
    out.samples.push_back(Sample("t" + std::to_string(i)));
    AddFixtures(fixtures, out.samples.back().sample_id, judges[i]);
    fixtures[out.samples.back().sample_id + "/combined"] = FormatCombinedResponse(judges[i], {});
  }
  for (auto& [k, v] : overrides) fixtures[k] = v;
  ScriptedBackend backend(fixtures);
  EvaluationOptions options;
  options.mode = mode;
  out.run = EvaluateBatch(out.samples, backend, Templates(), options, 1);
  return out;
}

TEST(ExportTraces, OneTracePerRecord) {
  const Fixture f = JudgeRun({{L(5), L(5), kNull, B(true)}, {kNull, kNull, B(true), B(true)}, {kNull, L(1), kNull, kNull}});
  const TraceExport out = ExportTraces(f.run, f.samples, {}, Templates());
  ASSERT_EQ(out.records.size(), 3u);
  EXPECT_TRUE(out.dropped.empty());
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(out.records[i].sample_id, f.samples[i].sample_id);
    EXPECT_EQ(out.records[i].prompt, RenderCombinedPrompt(f.samples[i], {}, Templates()));
    EXPECT_EQ(out.records[i].scores, f.run[i].report.scores);
    // The completion parses back to the recorded scores.
    for (const ParsedEvaluation& p : ParseCombinedResponse(out.records[i].completion, {})) {
      EXPECT_EQ(p.score, f.run[i].report.scores[p.metric]);
    }
  }
}

TEST(ExportTraces, SkippedCallsBecomeStubs) {
  // Bare refusal: usefulness was asked, faithfulness skipped.
  const Fixture f = JudgeRun({{kNull, kNull, kNull, B(true)}});
  ASSERT_TRUE(f.run[0].report.skipped_calls.contains(JudgeCall::kFaithfulness));
  const TraceExport out = ExportTraces(f.run, f.samples, {}, Templates());
  ASSERT_EQ(out.records.size(), 1u);
  const std::string stub = SkippedCallStub(Metric::kFaithfulness, {});
  EXPECT_TRUE(out.records[0].completion.ends_with(stub));
  const auto parsed = ParseMetricResponse(Metric::kFaithfulness, stub, {});
  EXPECT_EQ(parsed.score, kNull);
  EXPECT_EQ(std::count(out.records[0].completion.begin(), out.records[0].completion.end(), '{'), 4);
}

TEST(ExportTraces, MalformedResponseIsDropped) {
  const Fixture f = JudgeRun({{L(5), L(5), kNull, B(true)}, {L(4), L(4), kNull, B(true)}}, EvaluationMode::kFourCall,
                        {{"t1/completeness", "I think it is complete."}});
  const TraceExport out = ExportTraces(f.run, f.samples, {}, Templates());
  EXPECT_EQ(out.records.size(), 1u);
  EXPECT_EQ(out.dropped, std::vector<std::string>{"t1"});
}

TEST(ExportTraces, CallErrorIsDropped) {
  Fixture f = JudgeRun({{L(5), L(5), kNull, B(true)}});
  f.run[0].report.raw_responses.erase(JudgeCall::kFaithfulness);
  f.run[0].report.call_errors[JudgeCall::kFaithfulness] = "transient: gone";
  f.run[0].report.scores[Metric::kFaithfulness] = MetricScore::FormatError();
  EXPECT_EQ(ExportTraces(f.run, f.samples, {}, Templates()).dropped.size(), 1u);
}

TEST(ExportTraces, RejectsUnsuitableRuns) {
  const Fixture single = JudgeRun({{L(5), L(5), kNull, B(true)}}, EvaluationMode::kSingleCall);
  try {
    ExportTraces(single.run, single.samples, {}, Templates());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingRawResponses);
  }
  Fixture stripped = JudgeRun({{L(5), L(5), kNull, B(true)}});
  stripped.run[0].report.raw_responses.clear();
  EXPECT_THROW(ExportTraces(stripped.run, stripped.samples, {}, Templates()), Error);
  Fixture orphan = JudgeRun({{L(5), L(5), kNull, B(true)}});
  try {
    ExportTraces(orphan.run, std::vector<GroundedQASample>{}, {}, Templates());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchema);
  }
}

TEST(TraceFile, JsonLines) {
  const Fixture f = JudgeRun({{L(5), L(5), kNull, B(true)}, {L(3), L(2), kNull, B(false)}});
  const TraceExport out = ExportTraces(f.run, f.samples, {}, Templates());
  gjtest::TempDir dir("traces");
  WriteTraceFile(dir / "t.jsonl", out.records);
  const std::string text = ReadTextFile(dir / "t.jsonl");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  const auto first = nlohmann::json::parse(text.substr(0, text.find('\n')));
  EXPECT_EQ(first["sample_id"], "t0");
  EXPECT_EQ(first["completion"], out.records[0].completion);
  EXPECT_EQ(first["scores"]["answer_relevancy"], 5);
  EXPECT_TRUE(first["scores"]["usefulness"].is_null());
}

TraceRecord Trace(std::string id, int relevancy) {
  TraceRecord t;
  t.sample_id = std::move(id);
  t.scores[Metric::kAnswerRelevancy] = L(relevancy);
  t.scores[Metric::kCompleteness] = L(5);
  t.scores[Metric::kFaithfulness] = B(true);
  t.scores[Metric::kPositiveAcceptance] = B(true);
  return t;
}

TEST(Balance, UniformPoolKeepsLowestIds) {
  std::vector<TraceRecord> pool;
  for (int i = 9; i >= 0; --i) pool.push_back(Trace("id" + std::to_string(i), 4));
  const auto picked = BalanceSelection(pool, 4);
  std::set<std::string> ids;
  for (std::size_t i : picked) ids.insert(pool[i].sample_id);
  EXPECT_EQ(ids, (std::set<std::string>{"id0", "id1", "id2", "id3"}));
  EXPECT_TRUE(std::is_sorted(picked.begin(), picked.end()));
  EXPECT_EQ(BalanceObjective(pool, picked), 0.0);
  EXPECT_EQ(BalanceSelection(pool, 10).size(), 10u);
}

TEST(Balance, SkewedPoolReachesBruteForceOptimum) {
  std::vector<TraceRecord> pool;
  for (int i = 0; i < 30; ++i) {
    char id[8];
    std::snprintf(id, sizeof(id), "p%02d", i);
    pool.push_back(Trace(id, i % 3 == 0 ? 1 : 5));
  }
  const auto picked = BalanceSelection(pool, 20);
  ASSERT_EQ(picked.size(), 20u);
  int ones = 0;
  for (std::size_t i : picked) ones += pool[i].scores[Metric::kAnswerRelevancy] == L(1) ? 1 : 0;
  EXPECT_EQ(ones, 10);

  // Only the relevancy histogram varies; try every composition of 20 from
  // ten 1s and twenty 5s.
  double best = 1e18;
  for (int k = 0; k <= 10; ++k) {
    const double d1 = k - 10.0, d5 = (20 - k) - 10.0;
    best = std::min(best, d1 * d1 + d5 * d5);
  }
  EXPECT_DOUBLE_EQ(BalanceObjective(pool, picked), best);
  EXPECT_EQ(BalanceSelection(pool, 20), picked);
}

TEST(Balance, ObjectiveByHand) {
  std::vector<TraceRecord> pool = {Trace("a", 1), Trace("b", 5), Trace("c", 5)};
  // Relevancy takes two values; picking {b, c} gives counts (0, 2) against 1 each.
  EXPECT_DOUBLE_EQ(BalanceObjective(pool, std::vector<std::size_t>{1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(BalanceObjective(pool, std::vector<std::size_t>{0, 1}), 0.0);
}

TEST(Balance, TargetExceedsPool) {
  std::vector<TraceRecord> pool = {Trace("a", 1)};
  try {
    BalanceSelection(pool, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTargetExceedsPool);
  }
  EXPECT_TRUE(BalanceSelection(pool, 0).empty());
}

}  // namespace
}  // namespace groundjudge
