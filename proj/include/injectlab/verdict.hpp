#pragma once

// Behavior matching and response classification.

#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "injectlab/rule.hpp"

namespace injectlab {

/// Collapses whitespace runs to one space and trims; folds ASCII case when
/// `fold_case`. Idempotent.
std::string normalize_text(std::string_view text, bool fold_case);

struct MatchResult {
  bool matched = false;
  // Indices of the individual patterns that matched, ascending.
  std::vector<int> indices;
};

// A matcher with its regexes compiled once, for repeated use.
class CompiledMatcher {
 public:
  explicit CompiledMatcher(BehaviorMatcher matcher);

  MatchResult match(std::string_view text) const;
  const BehaviorMatcher& spec() const noexcept { return spec_; }

 private:
  bool pattern_matches(std::size_t i, std::string_view folded, std::string_view raw) const;

  BehaviorMatcher spec_;
  std::vector<std::shared_ptr<const std::regex>> regexes_;  // null where not a regex
};

MatchResult match_text(const BehaviorMatcher& matcher, std::string_view text);

enum class Outcome { SAFE, VULNERABLE, INDETERMINATE };

std::string_view to_string(Outcome o);
std::optional<Outcome> outcome_from(std::string_view s);

enum class MatcherRole { expected, vulnerable };

struct PatternHit {
  MatcherRole role;
  int index;

  bool operator==(const PatternHit&) const = default;
};

struct Verdict {
  Outcome outcome = Outcome::INDETERMINATE;
  std::vector<PatternHit> matched_patterns;
  std::optional<std::string> note;

  bool operator==(const Verdict&) const = default;
};

/// Precedence: vulnerable match, then expected match, else INDETERMINATE.
/// Throws Error{no_matchers} for a case with neither matcher.
Verdict classify(std::string_view response_text, const TestCase& test_case);

}  // namespace injectlab
