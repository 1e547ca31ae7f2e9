#pragma once

// Test-rule documents: parsing both the flat and nested YAML dialects,
// validation against a matrix, suite directory loading and serialization.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "injectlab/matrix.hpp"

namespace injectlab {

enum class PatternKind { exact, substring, regex, keyword_set };
enum class MatchMode { any, all };

std::string_view to_string(PatternKind k);
std::string_view to_string(MatchMode m);
std::optional<PatternKind> pattern_kind_from(std::string_view s);
std::optional<MatchMode> match_mode_from(std::string_view s);

struct PatternSpec {
  PatternKind kind = PatternKind::substring;
  std::string value;
  bool case_sensitive = false;
  // keyword_set only: minimum number of tokens that must appear.
  int threshold = 1;

  bool operator==(const PatternSpec&) const = default;
};

struct BehaviorMatcher {
  MatchMode mode = MatchMode::any;
  std::vector<PatternSpec> patterns;

  bool operator==(const BehaviorMatcher&) const = default;

  // Plain-string output fields normalize to this shape.
  static BehaviorMatcher from_plain(std::string value);
};

struct TestCase {
  std::optional<std::string> name;
  std::string prompt;
  std::optional<std::string> system_prompt;
  std::optional<BehaviorMatcher> expected_behavior;
  std::optional<BehaviorMatcher> vulnerable_behavior;

  bool operator==(const TestCase&) const = default;

  bool runnable() const { return expected_behavior || vulnerable_behavior; }
};

struct TestRule {
  TechniqueId id{Tactic::PI, 1};
  std::string name;
  std::optional<std::string> description;
  std::vector<TestCase> tests;
  // Set by load_suite; not part of the document, so equality ignores it.
  std::filesystem::path source_file;

  bool operator==(const TestRule& o) const {
    return id == o.id && name == o.name && description == o.description && tests == o.tests;
  }
};

enum class Severity { error, warning };

struct Diagnostic {
  Severity severity = Severity::error;
  std::string message;
  std::filesystem::path file;
  std::optional<std::size_t> line;

  // `file:line: error: message`
  std::string format() const;
};

/// Accepts the flat dialect (top-level prompt/expected_output/vulnerable_output)
/// and the nested `tests:` dialect. Unknown top-level keys are reported as
/// warnings through `warnings` when given.
/// Throws Error{parse}, Error{schema} or Error{empty_tests}.
TestRule parse_rule_document(std::string_view text, std::vector<Diagnostic>* warnings = nullptr);

/// Regexes are checked for compilation and for constructs outside the
/// portable subset (backreferences).
std::optional<std::string> check_pattern(const PatternSpec& p);

std::vector<Diagnostic> validate_rule(const TestRule& rule, const Matrix& matrix);

struct SuiteLoad {
  std::vector<TestRule> rules;
  std::vector<Diagnostic> diagnostics;

  bool has_errors() const;
};

/// Reads every `*.yaml` file of `dir` in byte-wise sorted filename order.
/// Per-file failures become diagnostics; only an unreadable directory throws.
SuiteLoad load_suite(const std::filesystem::path& dir);

/// Emits the nested dialect.
std::string serialize_rule(const TestRule& rule);

}  // namespace injectlab
