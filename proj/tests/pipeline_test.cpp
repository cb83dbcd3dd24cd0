#include <gtest/gtest.h>

#include <thread>

#include "groundjudge/error.hpp"
#include "groundjudge/pipeline.hpp"
#include "test_support.hpp"

namespace groundjudge {
namespace {

const MetricScore kNull = MetricScore::Null();
const MetricScore kFE = MetricScore::FormatError();
MetricScore L(int v) { return MetricScore::Likert(v); }
MetricScore B(bool v) { return MetricScore::Boolean(v); }

GroundedQASample Sample(std::string id = "s") {
  return {std::move(id), "Why?", {"Because [1]."}, "Because [1].", std::string("Because [1].")};
}

// rel, comp, use, faith per-metric responses for one sample.
std::map<std::string, std::string> Fixtures(const std::string& id, std::array<MetricScore, 4> scores,
                                            const PromptVariant& variant = {}) {
  std::map<std::string, std::string> f;
  for (std::size_t i = 0; i < 4; ++i) {
    const Metric m = kJudgedMetrics[i];
    f[id + "/" + std::string(CallName(CallForMetric(m)))] = FormatMetricResponse(m, scores[i], variant, "why");
  }
  f[id + "/combined"] = FormatCombinedResponse(scores, variant);
  return f;
}

const TemplateSet& Templates() {
  static const TemplateSet t = TemplateSet::Defaults();
  return t;
}

TEST(EvaluateSample, AnswerableAnswered) {
  ScriptedBackend backend(Fixtures("s", {L(5), L(5), B(false), B(true)}));
  const EvaluationReport r = EvaluateSample(Sample(), backend, Templates(), {});
  EXPECT_EQ(r.scores[Metric::kUsefulness], kNull);
  EXPECT_TRUE(r.skipped_calls.contains(JudgeCall::kUsefulness));
  EXPECT_FALSE(r.raw_responses.contains(JudgeCall::kUsefulness));
  EXPECT_EQ(r.scores[Metric::kPositiveAcceptance], B(true));
  EXPECT_EQ(r.scores[Metric::kNegativeRejection], kNull);
  EXPECT_EQ(r.situation, Situation::kAnswerableAnswered);
  EXPECT_EQ(r.justifications.at(Metric::kFaithfulness), "why");
  EXPECT_EQ(r.attempts.at(JudgeCall::kAnswerRelevancy), 1);
  EXPECT_EQ(backend.stats().calls, 3);
}

TEST(EvaluateSample, BareAdversarialRefusal) {
  ScriptedBackend backend(Fixtures("s", {kNull, kNull, kNull, B(true)}));
  const EvaluationReport r = EvaluateSample(Sample(), backend, Templates(), {});
  EXPECT_EQ(r.scores[Metric::kFaithfulness], kNull);
  EXPECT_TRUE(r.skipped_calls.contains(JudgeCall::kFaithfulness));
  EXPECT_EQ(r.scores[Metric::kPositiveAcceptance], kNull);
  EXPECT_EQ(r.scores[Metric::kNegativeRejection], B(true));
  EXPECT_EQ(backend.stats().calls, 3);
  EXPECT_EQ(r.situation, Situation::kAdversarialRefusedBare);
}

TEST(EvaluateSample, RefusalWithRelatedInfo) {
  ScriptedBackend backend(Fixtures("s", {kNull, kNull, B(true), B(true)}));
  const EvaluationReport r = EvaluateSample(Sample(), backend, Templates(), {});
  EXPECT_EQ(backend.stats().calls, 4);
  EXPECT_EQ(r.scores[Metric::kNegativeRejection], B(true));
  EXPECT_EQ(r.situation, Situation::kAdversarialRefusedWithRelatedInfo);
  EXPECT_TRUE(r.skipped_calls.empty());
}

TEST(EvaluateSample, CallCountFormula) {
  const std::vector<MetricScore> rels = {L(1), L(5), kNull}, comps = {L(3), kNull}, uses = {B(true), B(false), kNull};
  for (const auto& rel : rels) {
    for (const auto& comp : comps) {
      for (const auto& use : uses) {
        ScriptedBackend backend(Fixtures("s", {rel, comp, use, B(true)}));
        const EvaluationReport r = EvaluateSample(Sample(), backend, Templates(), {});
        const bool use_called = rel.is_null();
        const bool use_non_null = use_called && !use.is_null();
        const long expected = 2 + (rel.is_null() ? 1 : 0) + ((!rel.is_null() || use_non_null) ? 1 : 0);
        EXPECT_EQ(backend.stats().calls, expected) << rel.ToString() << comp.ToString() << use.ToString();
        EXPECT_GE(backend.stats().calls, 3);
        EXPECT_LE(backend.stats().calls, 4);
        if (r.situation != Situation::kUndetermined) EXPECT_TRUE(IsApplicabilityConsistent(r));
        for (JudgeCall c : r.skipped_calls) EXPECT_FALSE(r.raw_responses.contains(c));
      }
    }
  }
}

TEST(EvaluateSample, RelevancyFormatErrorIssuesEverything) {
  auto f = Fixtures("s", {L(5), L(5), B(true), B(true)});
  f["s/answer_relevancy"] = "no json here";
  ScriptedBackend backend(f);
  const EvaluationReport r = EvaluateSample(Sample(), backend, Templates(), {});
  EXPECT_EQ(backend.stats().calls, 4);
  EXPECT_EQ(r.scores[Metric::kAnswerRelevancy], kFE);
  EXPECT_EQ(r.scores[Metric::kPositiveAcceptance], kFE);
  EXPECT_EQ(r.scores[Metric::kNegativeRejection], kFE);
  EXPECT_EQ(r.situation, Situation::kUndetermined);
  EXPECT_EQ(r.raw_responses.at(JudgeCall::kAnswerRelevancy), "no json here");
}

TEST(EvaluateSample, BackendFailureBecomesFormatError) {
  auto f = Fixtures("s", {L(4), L(4), kNull, B(true)});
  f.erase("s/faithfulness");
  ScriptedBackend backend(f);
  const EvaluationReport r = EvaluateSample(Sample(), backend, Templates(), {});
  EXPECT_EQ(r.scores[Metric::kFaithfulness], kFE);
  EXPECT_NE(r.call_errors.at(JudgeCall::kFaithfulness).find("missing_fixture"), std::string::npos);
  EXPECT_EQ(r.scores[Metric::kPositiveAcceptance], B(true));
}

class ThrowingBackend : public JudgeBackend {
 public:
  explicit ThrowingBackend(ErrorKind kind) : kind_(kind) {}
  Completion Complete(const CompletionRequest&) override {
    ++calls_;
    throw Error(kind_, "nope");
  }

 private:
  ErrorKind kind_;
};

TEST(EvaluateSample, AuthAndConfigAreFatal) {
  for (ErrorKind kind : {ErrorKind::kAuth, ErrorKind::kConfig}) {
    ThrowingBackend backend(kind);
    try {
      EvaluateSample(Sample(), backend, Templates(), {});
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), kind);
    }
  }
  ThrowingBackend transient(ErrorKind::kTransient);
  const EvaluationReport r = EvaluateSample(Sample(), transient, Templates(), {});
  for (Metric m : kAllMetrics) {
    if (m != Metric::kUsefulness && m != Metric::kFaithfulness) EXPECT_EQ(r.scores[m], kFE);
  }
}

TEST(EvaluateSample, SingleCallAgreesWithFourCall) {
  const std::vector<std::array<MetricScore, 4>> cases = {
      {L(5), L(5), kNull, B(true)}, {kNull, L(1), B(true), B(true)}, {L(2), kNull, kNull, B(false)},
      {kNull, kNull, B(false), B(true)}, {kNull, kNull, kNull, kNull}};
  for (const PromptVariant variant : {PromptVariant{}, PromptVariant{false, false, false}}) {
    for (const auto& scores : cases) {
      ScriptedBackend four(Fixtures("s", scores, variant));
      ScriptedBackend single(Fixtures("s", scores, variant));
      EvaluationOptions options;
      options.variant = variant;
      const EvaluationReport a = EvaluateSample(Sample(), four, Templates(), options);
      options.mode = EvaluationMode::kSingleCall;
      const EvaluationReport b = EvaluateSample(Sample(), single, Templates(), options);
      EXPECT_EQ(a.scores, b.scores);
      EXPECT_EQ(single.stats().calls, 1);
      EXPECT_EQ(single.requested_tags(), std::vector<std::string>{"s/combined"});
      EXPECT_TRUE(b.skipped_calls.empty());
    }
  }
}

TEST(EvaluateSample, MissingGroundTruthIsRecorded) {
  GroundedQASample s = Sample();
  s.ground_truth_answer.reset();
  ScriptedBackend backend(Fixtures("s", {L(5), L(5), kNull, B(true)}));
  EXPECT_THROW(EvaluateSample(s, backend, Templates(), {}), Error);
  EvaluationOptions options;
  options.variant.include_ground_truth = false;
  ScriptedBackend sole(Fixtures("s", {L(5), L(5), kNull, B(true)}, options.variant));
  EXPECT_EQ(EvaluateSample(s, sole, Templates(), options).scores[Metric::kCompleteness], L(5));
}

// Delays each call by a sample-dependent amount so completions finish out
// of order.
class JitterBackend : public JudgeBackend {
 public:
  explicit JitterBackend(std::map<std::string, std::string> fixtures) : inner_(std::move(fixtures)) {}
  Completion Complete(const CompletionRequest& request) override {
    ++calls_;
    const auto h = std::hash<std::string>{}(request.request_tag);
    std::this_thread::sleep_for(std::chrono::milliseconds(h % 7));
    const int now = ++in_flight_;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    Completion c = inner_.Complete(request);
    --in_flight_;
    return c;
  }
  int max_in_flight() const { return max_in_flight_.load(); }

 private:
  ScriptedBackend inner_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

TEST(EvaluateBatch, PreservesInputOrder) {
  std::vector<GroundedQASample> samples;
  std::map<std::string, std::string> fixtures;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "sample-" + std::to_string(9 - i);
    samples.push_back(Sample(id));
    const auto f = Fixtures(id, {L(1 + i % 5), L(5), kNull, B(i % 2 == 0)});
    fixtures.insert(f.begin(), f.end());
  }
  JitterBackend backend(fixtures);
  std::vector<std::string> order;
  EvaluateBatch(samples, backend, Templates(), {}, 4, [&](const RunRecord& r) { order.push_back(r.report.sample_id); });
  ASSERT_EQ(order.size(), 10u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(order[i], samples[i].sample_id);
  // Four samples, each with up to two concurrent first calls.
  EXPECT_LE(backend.max_in_flight(), 8);
}

TEST(EvaluateBatch, MalformedSampleDoesNotAbort) {
  std::vector<GroundedQASample> samples = {Sample("a"), Sample("b"), Sample("c")};
  std::map<std::string, std::string> fixtures;
  for (const auto& s : samples) {
    const auto f = Fixtures(s.sample_id, {L(5), L(5), kNull, B(true)});
    fixtures.insert(f.begin(), f.end());
  }
  fixtures["b/answer_relevancy"] = "{\"answer_2_relevancy\": \"five\"}";
  ScriptedBackend backend(fixtures);
  const auto records = EvaluateBatch(samples, backend, Templates(), {}, 2);
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(records[1].report.scores[Metric::kAnswerRelevancy], kFE);
  EXPECT_EQ(records[1].report.scores[Metric::kPositiveAcceptance], kFE);
  EXPECT_EQ(records[1].report.scores[Metric::kNegativeRejection], kFE);
  EXPECT_EQ(records[2].report.scores[Metric::kAnswerRelevancy], L(5));
}

TEST(EvaluateBatch, SampleLevelFailureBecomesRecord) {
  GroundedQASample no_truth = Sample("x");
  no_truth.ground_truth_answer.reset();
  std::vector<GroundedQASample> samples = {no_truth, Sample("y")};
  auto fixtures = Fixtures("y", {L(5), L(5), kNull, B(true)});
  ScriptedBackend backend(fixtures);
  const auto records = EvaluateBatch(samples, backend, Templates(), {}, 1);
  ASSERT_EQ(records.size(), 2u);
  for (Metric m : kAllMetrics) EXPECT_EQ(records[0].report.scores[m], kFE);
  EXPECT_FALSE(records[0].report.call_errors.empty());
  EXPECT_EQ(records[1].report.situation, Situation::kAnswerableAnswered);
}

TEST(EvaluateBatch, FatalErrorsStopTheBatch) {
  ThrowingBackend backend(ErrorKind::kAuth);
  std::vector<GroundedQASample> samples = {Sample("a"), Sample("b")};
  EXPECT_THROW(EvaluateBatch(samples, backend, Templates(), {}, 2), Error);
  EXPECT_THROW(EvaluateBatch(samples, backend, Templates(), {}, 0), Error);
}

TEST(RunFile, RecordRoundTripAndKeyOrder) {
  ScriptedBackend backend(Fixtures("s", {kNull, L(2), B(true), B(false)}));
  EvaluationOptions options;
  options.judge.model_id = "m";
  options.judge.temperature = 0.25;
  const auto records = EvaluateBatch(std::vector{Sample()}, backend, Templates(), options, 1);
  const nlohmann::ordered_json j = RunRecordToJson(records[0]);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"sample_id", "mode", "scores", "situation", "skipped_calls",
                                            "justifications", "raw_responses", "attempts", "call_errors",
                                            "model_id", "temperature", "prompt_variant"}));
  EXPECT_EQ(j["mode"], "four_call");
  EXPECT_EQ(RunRecordFromJson(nlohmann::json::parse(j.dump())), records[0]);

  gjtest::TempDir dir("run");
  WriteRunFile(dir / "run.jsonl", records);
  EXPECT_EQ(LoadRunFile(dir / "run.jsonl"), records);
  EXPECT_EQ(ReadTextFile(dir / "run.jsonl"), RunRecordLine(records[0]));
}

TEST(RunFile, RejectsMalformedRecords) {
  gjtest::TempDir dir("run");
  WriteFileAtomic(dir / "bad.jsonl", "{\"sample_id\": \"a\"}\n");
  EXPECT_THROW(LoadRunFile(dir / "bad.jsonl"), Error);
  WriteFileAtomic(dir / "bad2.jsonl", "not json\n");
  EXPECT_THROW(LoadRunFile(dir / "bad2.jsonl"), Error);
}

TEST(RunFile, ReplayRerunIsByteIdentical) {
  gjtest::TempDir dir("replay-run");
  std::vector<GroundedQASample> samples;
  std::map<std::string, std::string> responses;  // prompt -> response
  for (int i = 0; i < 5; ++i) {
    GroundedQASample s = Sample("r" + std::to_string(i));
    s.answer += " variant " + std::to_string(i);
    samples.push_back(s);
    const auto f = Fixtures(s.sample_id, {L(1 + i), L(5 - i), kNull, B(i % 2 == 0)});
    for (Metric m : kJudgedMetrics) {
      responses[RenderMetricPrompt(m, s, {}, Templates())] =
          f.at(s.sample_id + "/" + std::string(CallName(CallForMetric(m))));
    }
  }
  gjtest::FakeChatServer server([&](const std::string& prompt) {
    return std::pair{200, gjtest::FakeChatServer::ChatBody(responses.at(prompt))};
  });
  ::setenv("GJ_PIPELINE_TEST_KEY", "k", 1);
  BackendConfig remote;
  remote.kind = BackendConfig::Kind::kRemoteChat;
  remote.endpoint_url = server.url();
  remote.api_key_env = "GJ_PIPELINE_TEST_KEY";
  remote.cache_dir = dir / "cache";
  auto first = MakeBackend(remote);
  WriteRunFile(dir / "a.jsonl", EvaluateBatch(samples, *first, Templates(), {}, 3));
  EXPECT_EQ(first->stats().network_requests, 15);

  BackendConfig replay;
  replay.kind = BackendConfig::Kind::kReplay;
  replay.cache_dir = dir / "cache";
  auto second = MakeBackend(replay);
  WriteRunFile(dir / "b.jsonl", EvaluateBatch(samples, *second, Templates(), {}, 2));
  auto third = MakeBackend(remote);
  WriteRunFile(dir / "c.jsonl", EvaluateBatch(samples, *third, Templates(), {}, 1));
  EXPECT_EQ(third->stats().network_requests, 0);
  EXPECT_EQ(ReadTextFile(dir / "a.jsonl"), ReadTextFile(dir / "b.jsonl"));
  EXPECT_EQ(ReadTextFile(dir / "a.jsonl"), ReadTextFile(dir / "c.jsonl"));
}

TEST(Mode, Names) {
  EXPECT_EQ(ModeFromName("pipeline"), EvaluationMode::kFourCall);
  EXPECT_EQ(ModeFromName("single"), EvaluationMode::kSingleCall);
  EXPECT_EQ(ModeFromName(ModeName(EvaluationMode::kSingleCall)), EvaluationMode::kSingleCall);
  EXPECT_FALSE(ModeFromName("double"));
}

}  // namespace
}  // namespace groundjudge
