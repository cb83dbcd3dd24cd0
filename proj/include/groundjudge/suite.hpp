#pragma once

// Unit-test suites and plain sample files.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "groundjudge/model.hpp"

namespace groundjudge {

inline constexpr int kTestTypesPerSet = 16;

struct UnitTest {
  int set_id = 1;
  int test_type = 1;
  GroundedQASample sample;
  MetricMap<ExpectationSet> expectations;

  friend bool operator==(const UnitTest&, const UnitTest&) = default;
};

struct TestSuite {
  std::string name;
  bool allow_partial = false;
  std::vector<UnitTest> tests;

  friend bool operator==(const TestSuite&, const TestSuite&) = default;
};

struct Violation {
  enum class Severity { kError, kWarning };

  Severity severity = Severity::kError;
  // Zero when the violation is not tied to one test.
  int set_id = 0;
  int test_type = 0;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Checks every UnitTest and TestSuite invariant. Errors first in test
/// order, then per-set completeness warnings in set order.
std::vector<Violation> ValidateSuite(const TestSuite& suite);

/// Parses and validates a suite file. Throws Error with kind kIo, kSchema
/// (offending test named by JSON pointer) or kStructure (duplicate
/// coordinates). Warnings are not fatal; fetch them with ValidateSuite.
TestSuite LoadSuite(const std::filesystem::path& path);
TestSuite ParseSuite(const nlohmann::json& document);
nlohmann::json SuiteToJson(const TestSuite& suite);

/// One sample per JSONL line. Missing sample_id defaults to the 1-based
/// line number. Blank lines are skipped but still counted.
std::vector<GroundedQASample> LoadSamples(const std::filesystem::path& path);
GroundedQASample ParseSample(const nlohmann::json& object, const std::string& default_id);
nlohmann::json SampleToJson(const GroundedQASample& sample);

}  // namespace groundjudge
