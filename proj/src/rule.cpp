#include "injectlab/rule.hpp"

#include <algorithm>
#include <array>
#include <regex>
#include <sstream>

#include "injectlab/error.hpp"
#include "matcher_yaml.hpp"
#include "yaml_util.hpp"

namespace injectlab {

std::string_view to_string(PatternKind k) {
  switch (k) {
    case PatternKind::exact: return "exact";
    case PatternKind::substring: return "substring";
    case PatternKind::regex: return "regex";
    case PatternKind::keyword_set: return "keyword_set";
  }
  return "substring";
}

std::string_view to_string(MatchMode m) { return m == MatchMode::all ? "all" : "any"; }

std::optional<PatternKind> pattern_kind_from(std::string_view s) {
  if (s == "exact") return PatternKind::exact;
  if (s == "substring") return PatternKind::substring;
  if (s == "regex") return PatternKind::regex;
  if (s == "keyword_set") return PatternKind::keyword_set;
  return std::nullopt;
}

std::optional<MatchMode> match_mode_from(std::string_view s) {
  if (s == "any") return MatchMode::any;
  if (s == "all") return MatchMode::all;
  return std::nullopt;
}

BehaviorMatcher BehaviorMatcher::from_plain(std::string value) {
  return BehaviorMatcher{MatchMode::any, {PatternSpec{PatternKind::substring, std::move(value)}}};
}

std::string Diagnostic::format() const {
  std::string out = file.string();
  if (line) out += ":" + std::to_string(*line);
  if (!out.empty()) out += ": ";
  out += severity == Severity::error ? "error: " : "warning: ";
  out += message;
  return out;
}

bool SuiteLoad::has_errors() const {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::error; });
}

namespace {

std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

namespace detail {

PatternSpec parse_pattern(const YAML::Node& node) {
  if (!node.IsMap()) schema_error(node, "patterns", "each pattern must be a mapping");
  PatternSpec p;
  const std::string kind = required_string(node, "kind");
  const auto k = pattern_kind_from(kind);
  if (!k) schema_error(node, "kind", "unknown pattern kind '" + kind + "'");
  p.kind = *k;
  p.value = required_string(node, "value");
  if (p.value.empty() && p.kind != PatternKind::exact) {
    schema_error(node, "value", "must not be empty");
  }
  p.case_sensitive = optional_bool(node, "case_sensitive", false);
  p.threshold = optional_int(node, "threshold", 1);
  for (const auto& u : unknown_keys(node, {"kind", "value", "case_sensitive", "threshold"})) {
    throw Error(Errc::schema, "unknown pattern key '" + u.key + "'", u.line);
  }
  if (p.kind == PatternKind::keyword_set) {
    const auto tokens = split_tokens(p.value);
    if (tokens.empty()) schema_error(node, "value", "keyword_set needs at least one token");
    if (p.threshold < 1 || static_cast<std::size_t>(p.threshold) > tokens.size()) {
      schema_error(node, "threshold",
                   "must be between 1 and the token count (" + std::to_string(tokens.size()) + ")");
    }
  } else if (node["threshold"] && p.threshold != 1) {
    schema_error(node, "threshold", "only valid for keyword_set patterns");
  }
  return p;
}

BehaviorMatcher parse_matcher(const YAML::Node& node, const std::string& field) {
  if (node.IsScalar()) return BehaviorMatcher::from_plain(node.Scalar());
  if (!node.IsMap()) schema_error(node, field, "expected a string or a matcher object");
  for (const auto& u : unknown_keys(node, {"mode", "patterns"})) {
    throw Error(Errc::schema, "field '" + field + "': unknown matcher key '" + u.key + "'", u.line);
  }
  BehaviorMatcher m;
  const auto mode = optional_string(node, "mode").value_or("any");
  const auto parsed = match_mode_from(mode);
  if (!parsed) schema_error(node, field + ".mode", "expected 'any' or 'all'");
  m.mode = *parsed;
  const YAML::Node patterns = node["patterns"];
  if (!patterns || !patterns.IsSequence() || patterns.size() == 0) {
    schema_error(node, field + ".patterns", "must be a non-empty list");
  }
  for (const auto& p : patterns) m.patterns.push_back(parse_pattern(p));
  return m;
}

void emit_matcher(YAML::Emitter& out, const BehaviorMatcher& m) {
  out << YAML::BeginMap;
  out << YAML::Key << "mode" << YAML::Value << std::string(to_string(m.mode));
  out << YAML::Key << "patterns" << YAML::Value << YAML::BeginSeq;
  for (const auto& p : m.patterns) {
    out << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << std::string(to_string(p.kind));
    out << YAML::Key << "value" << YAML::Value << YAML::DoubleQuoted << p.value;
    out << YAML::Key << "case_sensitive" << YAML::Value << p.case_sensitive;
    if (p.kind == PatternKind::keyword_set) {
      out << YAML::Key << "threshold" << YAML::Value << p.threshold;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
}

}  // namespace detail

namespace {

constexpr std::array<std::string_view, 8> kRuleKeys{
    "id", "name", "description", "tests", "prompt", "system_prompt", "expected_output",
    "vulnerable_output"};
constexpr std::array<std::string_view, 5> kCaseKeys{
    "name", "prompt", "system_prompt", "expected_output", "vulnerable_output"};

void warn_unknown(const YAML::Node& map, std::span<const std::string_view> allowed,
                  const std::string& where, std::vector<Diagnostic>* warnings) {
  if (!warnings) return;
  for (const auto& u : detail::unknown_keys(map, allowed)) {
    warnings->push_back({Severity::warning, "unknown key '" + u.key + "' in " + where, {}, u.line});
  }
}

// In the flat dialect the case fields live on the document root, whose
// `name` belongs to the rule.
TestCase parse_case(const YAML::Node& node, bool flat) {
  TestCase c;
  if (!flat) c.name = detail::optional_string(node, "name");
  c.prompt = detail::required_string(node, "prompt");
  if (c.prompt.empty()) detail::schema_error(node, "prompt", "must not be empty");
  c.system_prompt = detail::optional_string(node, "system_prompt");
  if (const YAML::Node e = node["expected_output"]; e && !e.IsNull()) {
    c.expected_behavior = detail::parse_matcher(e, "expected_output");
  }
  if (const YAML::Node v = node["vulnerable_output"]; v && !v.IsNull()) {
    c.vulnerable_behavior = detail::parse_matcher(v, "vulnerable_output");
  }
  return c;
}

}  // namespace

TestRule parse_rule_document(std::string_view text, std::vector<Diagnostic>* warnings) {
  const YAML::Node root = detail::load_document(text);
  if (!root.IsMap()) {
    throw Error(Errc::parse, "rule document must be a mapping", detail::line_of(root));
  }
  warn_unknown(root, kRuleKeys, "rule document", warnings);

  TestRule rule;
  const std::string id_text = detail::required_string(root, "id");
  try {
    rule.id = parse_technique_id(id_text);
  } catch (const Error& e) {
    detail::schema_error(root["id"], "id", e.what());
  }
  rule.name = detail::required_string(root, "name");
  rule.description = detail::optional_string(root, "description");

  const YAML::Node tests = root["tests"];
  if (tests && !tests.IsNull()) {
    for (const char* flat : {"prompt", "system_prompt", "expected_output", "vulnerable_output"}) {
      if (root[flat]) {
        detail::schema_error(root[flat], flat, "top-level field cannot be combined with 'tests'");
      }
    }
    if (!tests.IsSequence()) detail::schema_error(tests, "tests", "expected a list of test cases");
    if (tests.size() == 0) {
      throw Error(Errc::empty_tests, "rule " + rule.id.str() + " has an empty 'tests' list",
                  detail::line_of(tests));
    }
    for (const auto& node : tests) {
      if (!node.IsMap()) detail::schema_error(node, "tests", "each test case must be a mapping");
      warn_unknown(node, kCaseKeys, "test case", warnings);
      rule.tests.push_back(parse_case(node, false));
    }
  } else {
    rule.tests.push_back(parse_case(root, true));
  }
  return rule;
}

std::optional<std::string> check_pattern(const PatternSpec& p) {
  if (p.kind != PatternKind::regex) return std::nullopt;
  // Backreferences are outside the portable dialect.
  for (std::size_t i = 0; i + 1 < p.value.size(); ++i) {
    if (p.value[i] != '\\') continue;
    const char next = p.value[i + 1];
    if ((next >= '1' && next <= '9') || next == 'k') {
      return "regex '" + p.value + "' uses a backreference";
    }
    ++i;
  }
  try {
    std::regex re(p.value, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    return "regex '" + p.value + "' does not compile: " + e.what();
  }
  return std::nullopt;
}

std::vector<Diagnostic> validate_rule(const TestRule& rule, const Matrix& matrix) {
  std::vector<Diagnostic> out;
  auto add = [&](Severity s, std::string msg) {
    out.push_back({s, std::move(msg), rule.source_file, std::nullopt});
  };
  if (!matrix.find(rule.id)) add(Severity::error, "unknown technique " + rule.id.str());
  if (rule.name.empty()) add(Severity::warning, "rule " + rule.id.str() + " has an empty name");
  for (std::size_t i = 0; i < rule.tests.size(); ++i) {
    const auto& c = rule.tests[i];
    const std::string where = rule.id.str() + "#" + std::to_string(i);
    if (!c.runnable()) {
      add(Severity::warning, where + " has no expected_output or vulnerable_output; not runnable");
    }
    for (const auto* m : {&c.expected_behavior, &c.vulnerable_behavior}) {
      if (!*m) continue;
      for (const auto& p : (*m)->patterns) {
        if (auto problem = check_pattern(p)) add(Severity::error, where + ": " + *problem);
      }
    }
  }
  return out;
}

SuiteLoad load_suite(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::directory_iterator it(dir, ec);
  if (ec) throw Error(Errc::io, "cannot read suite directory " + dir.string() + ": " + ec.message());

  std::vector<std::string> names;
  SuiteLoad out;
  for (const auto& entry : it) {
    std::string name = entry.path().filename().string();
    if (name.ends_with(".yaml")) {
      names.push_back(std::move(name));
    } else if (name.ends_with(".yml")) {
      out.diagnostics.push_back({Severity::warning, "ignored: only .yaml files are loaded",
                                 entry.path(), std::nullopt});
    }
  }
  // std::string comparison is byte-wise (char_traits compares as unsigned char).
  std::sort(names.begin(), names.end());

  for (const auto& name : names) {
    const fs::path path = dir / name;
    try {
      if (!fs::is_regular_file(path)) throw Error(Errc::io, "not a regular file");
      std::vector<Diagnostic> warnings;
      TestRule rule = parse_rule_document(detail::read_file(path.string()), &warnings);
      rule.source_file = path;
      for (auto& w : warnings) {
        w.file = path;
        out.diagnostics.push_back(std::move(w));
      }
      out.rules.push_back(std::move(rule));
    } catch (const Error& e) {
      out.diagnostics.push_back({Severity::error, e.what(), path, e.line()});
    }
  }
  return out;
}

std::string serialize_rule(const TestRule& rule) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "id" << YAML::Value << rule.id.str();
  out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << rule.name;
  if (rule.description) {
    out << YAML::Key << "description" << YAML::Value << YAML::DoubleQuoted << *rule.description;
  }
  out << YAML::Key << "tests" << YAML::Value << YAML::BeginSeq;
  for (const auto& c : rule.tests) {
    out << YAML::BeginMap;
    if (c.name) out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << *c.name;
    out << YAML::Key << "prompt" << YAML::Value << YAML::DoubleQuoted << c.prompt;
    if (c.system_prompt) {
      out << YAML::Key << "system_prompt" << YAML::Value << YAML::DoubleQuoted << *c.system_prompt;
    }
    if (c.expected_behavior) {
      out << YAML::Key << "expected_output" << YAML::Value;
      detail::emit_matcher(out, *c.expected_behavior);
    }
    if (c.vulnerable_behavior) {
      out << YAML::Key << "vulnerable_output" << YAML::Value;
      detail::emit_matcher(out, *c.vulnerable_behavior);
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace injectlab
