#pragma once

#include <yaml-cpp/yaml.h>

#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace injectlab::detail {

std::optional<std::size_t> line_of(const YAML::Node& node);

// Parses one YAML document. Syntax errors and empty input become
// Error{parse} carrying the 1-based line.
YAML::Node load_document(std::string_view text);

[[noreturn]] void schema_error(const YAML::Node& at, const std::string& field,
                               const std::string& what);

std::string required_string(const YAML::Node& map, const char* key);
std::optional<std::string> optional_string(const YAML::Node& map, const char* key);
std::vector<std::string> string_list(const YAML::Node& map, const char* key);
bool optional_bool(const YAML::Node& map, const char* key, bool fallback);
int optional_int(const YAML::Node& map, const char* key, int fallback);
double optional_double(const YAML::Node& map, const char* key, double fallback);

// Keys of `map` outside `allowed`, with their lines.
struct UnknownKey {
  std::string key;
  std::optional<std::size_t> line;
};
std::vector<UnknownKey> unknown_keys(const YAML::Node& map,
                                     std::span<const std::string_view> allowed);
inline std::vector<UnknownKey> unknown_keys(const YAML::Node& map,
                                            std::initializer_list<std::string_view> allowed) {
  return unknown_keys(map, std::span<const std::string_view>(allowed.begin(), allowed.size()));
}

std::string read_file(const std::string& path);

}  // namespace injectlab::detail
