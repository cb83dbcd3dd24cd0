#include "groundjudge/suite.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "groundjudge/error.hpp"
#include "groundjudge/io.hpp"

namespace groundjudge {
namespace {

using nlohmann::json;

std::string TestSampleId(int set_id, int test_type) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "set%02d-type%02d", set_id, test_type);
  return buf;
}

[[noreturn]] void SchemaError(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::kSchema, where + ": " + what);
}

void RejectUnknownKeys(const json& object, std::initializer_list<std::string_view> allowed,
                       const std::string& where) {
  for (const auto& [key, _] : object.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      SchemaError(where, "unknown key \"" + key + "\"");
    }
  }
}

const json& RequireKey(const json& object, const char* key, const std::string& where) {
  auto it = object.find(key);
  if (it == object.end()) SchemaError(where, std::string("missing \"") + key + "\"");
  return *it;
}

std::string RequireString(const json& object, const char* key, const std::string& where) {
  const json& value = RequireKey(object, key, where);
  if (!value.is_string()) SchemaError(where + "/" + key, "expected string");
  return value.get<std::string>();
}

int RequireInt(const json& object, const char* key, const std::string& where) {
  const json& value = RequireKey(object, key, where);
  if (!value.is_number_integer()) SchemaError(where + "/" + key, "expected integer");
  return value.get<int>();
}

std::vector<std::string> ParseReferences(const json& object, const std::string& where) {
  const json& refs = RequireKey(object, "references", where);
  if (!refs.is_array()) SchemaError(where + "/references", "expected array");
  if (refs.empty()) SchemaError(where + "/references", "references must be non-empty");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (!refs[i].is_string()) {
      SchemaError(where + "/references/" + std::to_string(i), "expected string");
    }
    out.push_back(refs[i].get<std::string>());
  }
  return out;
}

std::optional<std::string> ParseGroundTruth(const json& object, const std::string& where) {
  auto it = object.find("ground_truth_answer");
  if (it == object.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) SchemaError(where + "/ground_truth_answer", "expected string");
  return it->get<std::string>();
}

ExpectationSet ParseExpectation(const json& entry, const std::string& where) {
  if (!entry.is_object()) SchemaError(where, "expected {\"in\": [...]}");
  RejectUnknownKeys(entry, {"in"}, where);
  const json& values = RequireKey(entry, "in", where);
  if (!values.is_array()) SchemaError(where + "/in", "expected array");
  if (values.empty()) SchemaError(where + "/in", "expectation set must be non-empty");
  ExpectationSet set;
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto score = ScoreFromJson(values[i]);
    if (!score || score->is_format_error()) {
      SchemaError(where + "/in/" + std::to_string(i),
                  "not an expectable score: " + values[i].dump());
    }
    set.push_back(*score);
  }
  return set;
}

std::string DescribeTest(const UnitTest& test) {
  return "set " + std::to_string(test.set_id) + ", type " + std::to_string(test.test_type);
}

std::string FormatTypeSet(const std::vector<int>& types) {
  std::ostringstream out;
  out << '{';
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (i) out << ", ";
    out << types[i];
  }
  out << '}';
  return out.str();
}

}  // namespace

std::vector<Violation> ValidateSuite(const TestSuite& suite) {
  std::vector<Violation> violations;
  auto error = [&](const UnitTest& t, std::string message) {
    violations.push_back({Violation::Severity::kError, t.set_id, t.test_type,
                          DescribeTest(t) + ": " + std::move(message)});
  };

  std::set<std::pair<int, int>> seen;
  std::map<int, std::set<int>> types_by_set;
  for (const UnitTest& t : suite.tests) {
    if (t.set_id < 1) error(t, "set_id must be >= 1");
    if (t.test_type < 1 || t.test_type > kTestTypesPerSet) error(t, "test_type must be in [1,16]");
    if (t.sample.references.empty()) error(t, "references must be non-empty");
    if (!seen.insert({t.set_id, t.test_type}).second) error(t, "duplicate (set_id, test_type)");
    types_by_set[t.set_id].insert(t.test_type);

    for (Metric m : kAllMetrics) {
      const ExpectationSet& expected = t.expectations[m];
      const std::string name(MetricName(m));
      if (expected.empty()) {
        error(t, name + " expectation set is empty");
        continue;
      }
      const bool likert = IsLikertMetric(m);
      for (const MetricScore& v : expected) {
        if (v.is_format_error()) {
          error(t, name + " expectation contains FORMAT_ERROR");
          break;
        }
        if ((likert && v.is_boolean()) || (!likert && v.is_likert())) {
          error(t, name + " expectation mixes score types (" + v.ToString() + " not allowed for " +
                       (likert ? "a likert" : "a boolean") + " metric)");
          break;
        }
      }
    }
  }

  if (!suite.allow_partial) {
    for (const auto& [set_id, types] : types_by_set) {
      std::vector<int> missing;
      for (int type = 1; type <= kTestTypesPerSet; ++type) {
        if (!types.contains(type)) missing.push_back(type);
      }
      if (!missing.empty()) {
        violations.push_back({Violation::Severity::kWarning, set_id, 0,
                              "set " + std::to_string(set_id) + " missing types " +
                                  FormatTypeSet(missing)});
      }
    }
  }
  return violations;
}

TestSuite ParseSuite(const json& document) {
  if (!document.is_object()) SchemaError("", "suite must be a JSON object");
  RejectUnknownKeys(document, {"name", "allow_partial", "tests"}, "");
  TestSuite suite;
  suite.name = RequireString(document, "name", "");
  if (auto it = document.find("allow_partial"); it != document.end()) {
    if (!it->is_boolean()) SchemaError("/allow_partial", "expected boolean");
    suite.allow_partial = it->get<bool>();
  }
  const json& tests = RequireKey(document, "tests", "");
  if (!tests.is_array()) SchemaError("/tests", "expected array");

  for (std::size_t i = 0; i < tests.size(); ++i) {
    const std::string where = "/tests/" + std::to_string(i);
    const json& entry = tests[i];
    if (!entry.is_object()) SchemaError(where, "expected object");
    RejectUnknownKeys(entry,
                      {"set_id", "test_type", "question", "references", "answer",
                       "ground_truth_answer", "expectations"},
                      where);
    UnitTest test;
    test.set_id = RequireInt(entry, "set_id", where);
    test.test_type = RequireInt(entry, "test_type", where);
    if (test.set_id < 1) SchemaError(where + "/set_id", "must be >= 1");
    if (test.test_type < 1 || test.test_type > kTestTypesPerSet) {
      SchemaError(where + "/test_type", "must be in [1,16]");
    }
    test.sample.sample_id = TestSampleId(test.set_id, test.test_type);
    test.sample.question = RequireString(entry, "question", where);
    test.sample.references = ParseReferences(entry, where);
    test.sample.answer = RequireString(entry, "answer", where);
    test.sample.ground_truth_answer = ParseGroundTruth(entry, where);

    const json& expectations = RequireKey(entry, "expectations", where);
    if (!expectations.is_object()) SchemaError(where + "/expectations", "expected object");
    for (const auto& [key, _] : expectations.items()) {
      if (!MetricFromName(key)) {
        SchemaError(where + "/expectations", "unknown metric key \"" + key + "\"");
      }
    }
    for (Metric m : kAllMetrics) {
      const std::string key(MetricName(m));
      const json& e = RequireKey(expectations, key.c_str(), where + "/expectations");
      test.expectations[m] = ParseExpectation(e, where + "/expectations/" + key);
    }
    suite.tests.push_back(std::move(test));
  }

  for (const Violation& v : ValidateSuite(suite)) {
    if (v.severity != Violation::Severity::kError) continue;
    const bool duplicate = v.message.find("duplicate") != std::string::npos;
    // Point at the last test with these coordinates: for duplicates that is
    // the second occurrence.
    std::size_t index = 0;
    for (std::size_t i = 0; i < suite.tests.size(); ++i) {
      if (suite.tests[i].set_id == v.set_id && suite.tests[i].test_type == v.test_type) index = i;
    }
    throw Error(duplicate ? ErrorKind::kStructure : ErrorKind::kSchema,
                "/tests/" + std::to_string(index) + " (" + v.message + ")");
  }
  return suite;
}

TestSuite LoadSuite(const std::filesystem::path& path) {
  const std::string text = ReadTextFile(path);
  json document;
  try {
    document = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kSchema, path.string() + ": invalid JSON: " + e.what());
  }
  return ParseSuite(document);
}

json SuiteToJson(const TestSuite& suite) {
  json tests = json::array();
  for (const UnitTest& t : suite.tests) {
    json expectations = json::object();
    for (Metric m : kAllMetrics) {
      json values = json::array();
      for (const MetricScore& v : t.expectations[m]) values.push_back(ScoreToJson(v));
      expectations[std::string(MetricName(m))] = {{"in", values}};
    }
    json entry = {{"set_id", t.set_id},
                  {"test_type", t.test_type},
                  {"question", t.sample.question},
                  {"references", t.sample.references},
                  {"answer", t.sample.answer},
                  {"expectations", expectations}};
    if (t.sample.ground_truth_answer) entry["ground_truth_answer"] = *t.sample.ground_truth_answer;
    tests.push_back(std::move(entry));
  }
  json doc = {{"name", suite.name}, {"tests", tests}};
  if (suite.allow_partial) doc["allow_partial"] = true;
  return doc;
}

GroundedQASample ParseSample(const json& object, const std::string& default_id) {
  if (!object.is_object()) SchemaError(default_id, "expected object");
  RejectUnknownKeys(object,
                    {"sample_id", "question", "references", "answer", "ground_truth_answer"},
                    default_id);
  GroundedQASample sample;
  if (auto it = object.find("sample_id"); it != object.end() && !it->is_null()) {
    if (!it->is_string()) SchemaError(default_id + "/sample_id", "expected string");
    sample.sample_id = it->get<std::string>();
  } else {
    sample.sample_id = default_id;
  }
  sample.question = RequireString(object, "question", default_id);
  sample.references = ParseReferences(object, default_id);
  sample.answer = RequireString(object, "answer", default_id);
  sample.ground_truth_answer = ParseGroundTruth(object, default_id);
  return sample;
}

json SampleToJson(const GroundedQASample& sample) {
  json out = {{"sample_id", sample.sample_id},
              {"question", sample.question},
              {"references", sample.references},
              {"answer", sample.answer}};
  if (sample.ground_truth_answer) out["ground_truth_answer"] = *sample.ground_truth_answer;
  return out;
}

std::vector<GroundedQASample> LoadSamples(const std::filesystem::path& path) {
  std::istringstream in(ReadTextFile(path));
  std::vector<GroundedQASample> samples;
  std::set<std::string> ids;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_number);
    json object;
    try {
      object = json::parse(line);
    } catch (const json::parse_error& e) {
      SchemaError(where, std::string("invalid JSON: ") + e.what());
    }
    try {
      samples.push_back(ParseSample(object, std::to_string(line_number)));
    } catch (const Error& e) {
      throw Error(e.kind(), where + ": " + e.message());
    }
    if (!ids.insert(samples.back().sample_id).second) {
      SchemaError(where, "duplicate sample_id \"" + samples.back().sample_id + "\"");
    }
  }
  return samples;
}

}  // namespace groundjudge
