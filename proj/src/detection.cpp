#include "injectlab/detection.hpp"

#include <nlohmann/json.hpp>
#include <set>

#include "injectlab/error.hpp"
#include "matcher_yaml.hpp"
#include "yaml_util.hpp"

namespace injectlab {

using nlohmann::json;

std::string_view to_string(AlertSeverity s) {
  switch (s) {
    case AlertSeverity::low: return "low";
    case AlertSeverity::medium: return "medium";
    case AlertSeverity::high: return "high";
  }
  return "medium";
}

DetectionRuleSet::DetectionRuleSet(std::vector<DetectionRule> rules) : rules_(std::move(rules)) {
  compiled_.reserve(rules_.size());
  for (const auto& r : rules_) compiled_.emplace_back(r.matcher);
}

DetectionLoad parse_detection_rules(std::string_view text, const Matrix* matrix) {
  DetectionLoad out;
  YAML::Node root;
  try {
    root = detail::load_document(text);
  } catch (const Error& e) {
    // an empty rules file is an empty rule set
    if (e.code() == Errc::parse && std::string_view(e.what()) == "empty document") return out;
    throw;
  }
  if (!root.IsSequence()) {
    throw Error(Errc::parse, "detection rules file must be a YAML list", detail::line_of(root));
  }

  std::vector<DetectionRule> rules;
  std::set<std::string> seen;
  for (const auto& node : root) {
    const auto line = detail::line_of(node);
    auto error = [&](const std::string& msg) {
      out.diagnostics.push_back({Severity::error, msg, {}, line});
    };
    try {
      if (!node.IsMap()) throw Error(Errc::schema, "detection rule must be a mapping", line);
      for (const auto& u :
           detail::unknown_keys(node, {"id", "technique", "severity", "description", "match"})) {
        throw Error(Errc::schema, "unknown key '" + u.key + "' in detection rule", u.line);
      }
      DetectionRule r;
      r.id = detail::required_string(node, "id");
      const std::string technique = detail::required_string(node, "technique");
      try {
        r.technique_id = parse_technique_id(technique);
      } catch (const Error& e) {
        throw Error(e.code(), "rule " + r.id + ": " + e.what(), line);
      }
      if (matrix && !matrix->find(r.technique_id)) {
        throw Error(Errc::not_found, "rule " + r.id + ": unknown technique " + technique, line);
      }
      const std::string sev = detail::optional_string(node, "severity").value_or("medium");
      if (sev == "low") {
        r.severity = AlertSeverity::low;
      } else if (sev == "medium") {
        r.severity = AlertSeverity::medium;
      } else if (sev == "high") {
        r.severity = AlertSeverity::high;
      } else {
        detail::schema_error(node, "severity", "expected low, medium or high");
      }
      r.description = detail::optional_string(node, "description").value_or("");
      if (!node["match"]) detail::schema_error(node, "match", "required field is missing");
      r.matcher = detail::parse_matcher(node["match"], "match");
      for (const auto& p : r.matcher.patterns) {
        if (auto problem = check_pattern(p)) throw Error(Errc::schema, "rule " + r.id + ": " + *problem, line);
      }
      if (!seen.insert(r.id).second) {
        error("duplicate detection rule id '" + r.id + "'");
        continue;
      }
      rules.push_back(std::move(r));
    } catch (const Error& e) {
      out.diagnostics.push_back({Severity::error, e.what(), {}, e.line() ? e.line() : line});
    }
  }
  out.rules = DetectionRuleSet(std::move(rules));
  return out;
}

DetectionLoad load_detection_rules(const std::filesystem::path& path, const Matrix* matrix) {
  DetectionLoad out = parse_detection_rules(detail::read_file(path.string()), matrix);
  for (auto& d : out.diagnostics) d.file = path;
  return out;
}

json to_json(const Alert& a) {
  return {{"rule_id", a.rule_id},
          {"technique_id", a.technique_id.str()},
          {"severity", to_string(a.severity)},
          {"line", a.line},
          {"matched_pattern_indices", a.matched_pattern_indices}};
}

std::vector<Alert> scan_event(const DetectionRuleSet& rules, const LogEvent& event,
                              std::size_t line) {
  std::vector<Alert> out;
  if (event.role != EventRole::user && event.role != EventRole::unknown) return out;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const MatchResult m = rules.matcher(i).match(event.text);
    if (!m.matched) continue;
    const auto& r = rules.rules()[i];
    out.push_back({r.id, r.technique_id, r.severity, line, m.indices});
  }
  return out;
}

std::optional<LogEvent> parse_log_line(std::string_view line, std::string* error) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::size_t first = 0;
  while (first < line.size() && (line[first] == ' ' || line[first] == '\t')) ++first;
  if (first == line.size() || line[first] != '{') {
    return LogEvent{std::nullopt, std::nullopt, EventRole::unknown, std::string(line)};
  }

  auto fail = [&](const std::string& why) -> std::optional<LogEvent> {
    if (error) *error = why;
    return std::nullopt;
  };
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return fail("invalid JSON");
  if (!j.contains("text") || !j["text"].is_string()) return fail("missing string field 'text'");
  LogEvent e;
  e.text = j["text"].get<std::string>();
  for (const char* key : {"timestamp", "session"}) {
    if (!j.contains(key) || j[key].is_null()) continue;
    if (!j[key].is_string()) return fail(std::string("field '") + key + "' must be a string");
    (std::string_view(key) == "timestamp" ? e.timestamp : e.session) = j[key].get<std::string>();
  }
  if (j.contains("role") && !j["role"].is_null()) {
    if (!j["role"].is_string()) return fail("field 'role' must be a string");
    const auto role = j["role"].get<std::string>();
    if (role == "user") {
      e.role = EventRole::user;
    } else if (role == "assistant") {
      e.role = EventRole::assistant;
    } else if (role == "system") {
      e.role = EventRole::system;
    } else if (role == "unknown") {
      e.role = EventRole::unknown;
    } else {
      return fail("unknown role '" + role + "'");
    }
  }
  return e;
}

std::size_t scan_log(const DetectionRuleSet& rules, std::istream& in, const ScanSink& sink,
                     std::size_t first_line) {
  std::size_t count = 0;
  std::size_t lineno = first_line;
  std::string line;
  std::string error;
  for (; std::getline(in, line); ++lineno) {
    const auto event = parse_log_line(line, &error);
    if (!event) {
      if (sink.on_corrupt) sink.on_corrupt(lineno, error);
      continue;
    }
    for (const auto& alert : scan_event(rules, *event, lineno)) {
      ++count;
      if (sink.on_alert) sink.on_alert(alert);
    }
  }
  return count;
}

ScanResult scan_log(const DetectionRuleSet& rules, std::istream& in, std::size_t first_line) {
  ScanResult out;
  scan_log(rules, in,
           ScanSink{[&](const Alert& a) { out.alerts.push_back(a); },
                    [&](std::size_t line, const std::string& why) {
                      out.corrupt.push_back("line " + std::to_string(line) + ": " + why);
                    }},
           first_line);
  return out;
}

}  // namespace injectlab
