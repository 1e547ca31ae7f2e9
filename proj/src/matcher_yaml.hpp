#pragma once

#include <yaml-cpp/yaml.h>

#include "injectlab/rule.hpp"

namespace injectlab::detail {

// Matcher grammar shared by rule documents, detection rules and mock scripts.
PatternSpec parse_pattern(const YAML::Node& node);
BehaviorMatcher parse_matcher(const YAML::Node& node, const std::string& field);
void emit_matcher(YAML::Emitter& out, const BehaviorMatcher& m);

}  // namespace injectlab::detail
