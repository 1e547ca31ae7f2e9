#pragma once

// Technique-mapped detection rules over prompt logs.

#include <filesystem>
#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "injectlab/matrix.hpp"
#include "injectlab/rule.hpp"
#include "injectlab/verdict.hpp"

namespace injectlab {

enum class AlertSeverity { low, medium, high };

std::string_view to_string(AlertSeverity s);

struct DetectionRule {
  std::string id;  // DET-<technique>-<NNN>
  TechniqueId technique_id{Tactic::PI, 1};
  AlertSeverity severity = AlertSeverity::medium;
  BehaviorMatcher matcher;
  std::string description;
};

// An immutable, compiled rule set.
class DetectionRuleSet {
 public:
  DetectionRuleSet() = default;
  explicit DetectionRuleSet(std::vector<DetectionRule> rules);

  const std::vector<DetectionRule>& rules() const noexcept { return rules_; }
  const CompiledMatcher& matcher(std::size_t i) const { return compiled_[i]; }
  std::size_t size() const noexcept { return rules_.size(); }
  bool empty() const noexcept { return rules_.empty(); }

 private:
  std::vector<DetectionRule> rules_;
  std::vector<CompiledMatcher> compiled_;
};

struct DetectionLoad {
  DetectionRuleSet rules;
  std::vector<Diagnostic> diagnostics;
};

/// Rules with problems (unknown technique, duplicate id, bad matcher) are
/// dropped with an error diagnostic. When `matrix` is given, techniques
/// missing from it are errors too. Throws Error{io, parse}.
DetectionLoad load_detection_rules(const std::filesystem::path& path,
                                   const Matrix* matrix = nullptr);
DetectionLoad parse_detection_rules(std::string_view text, const Matrix* matrix = nullptr);

enum class EventRole { user, assistant, system, unknown };

struct LogEvent {
  std::optional<std::string> timestamp;
  std::optional<std::string> session;
  EventRole role = EventRole::unknown;
  std::string text;
};

struct Alert {
  std::string rule_id;
  TechniqueId technique_id{Tactic::PI, 1};
  AlertSeverity severity = AlertSeverity::medium;
  std::size_t line = 0;  // 1-based position of the event in its stream
  std::vector<int> matched_pattern_indices;

  bool operator==(const Alert&) const = default;
};

nlohmann::json to_json(const Alert& a);

/// Only user and unknown roles are scanned.
std::vector<Alert> scan_event(const DetectionRuleSet& rules, const LogEvent& event,
                              std::size_t line = 0);

/// Parses one log line: a JSON object {timestamp?, session?, role?, text}
/// when it starts with '{', otherwise plain text with role unknown.
/// Returns nullopt with `error` filled for an unparseable JSON line.
std::optional<LogEvent> parse_log_line(std::string_view line, std::string* error = nullptr);

struct ScanSink {
  std::function<void(const Alert&)> on_alert;
  std::function<void(std::size_t line, const std::string& reason)> on_corrupt;
};

/// Streams `in` line by line; holds one event at a time. Returns alert count.
/// `first_line` numbers the first line of the stream.
std::size_t scan_log(const DetectionRuleSet& rules, std::istream& in, const ScanSink& sink,
                     std::size_t first_line = 1);

struct ScanResult {
  std::vector<Alert> alerts;
  std::vector<std::string> corrupt;
};

ScanResult scan_log(const DetectionRuleSet& rules, std::istream& in, std::size_t first_line = 1);

}  // namespace injectlab
