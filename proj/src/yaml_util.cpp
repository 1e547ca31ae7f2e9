#include "yaml_util.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "injectlab/error.hpp"

namespace injectlab::detail {

std::optional<std::size_t> line_of(const YAML::Node& node) {
  const auto mark = node.Mark();
  if (mark.is_null()) return std::nullopt;
  return static_cast<std::size_t>(mark.line) + 1;
}

YAML::Node load_document(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    std::optional<std::size_t> line;
    if (!e.mark.is_null()) line = static_cast<std::size_t>(e.mark.line) + 1;
    throw Error(Errc::parse, e.msg, line);
  }
  if (!root || root.IsNull()) throw Error(Errc::parse, "empty document", 1);
  return root;
}

void schema_error(const YAML::Node& at, const std::string& field, const std::string& what) {
  throw Error(Errc::schema, "field '" + field + "': " + what, line_of(at));
}

std::string required_string(const YAML::Node& map, const char* key) {
  const YAML::Node v = map[key];
  if (!v || v.IsNull()) schema_error(map, key, "required field is missing");
  if (!v.IsScalar()) schema_error(v, key, "expected a string");
  return v.Scalar();
}

std::optional<std::string> optional_string(const YAML::Node& map, const char* key) {
  const YAML::Node v = map[key];
  if (!v || v.IsNull()) return std::nullopt;
  if (!v.IsScalar()) schema_error(v, key, "expected a string");
  return v.Scalar();
}

std::vector<std::string> string_list(const YAML::Node& map, const char* key) {
  std::vector<std::string> out;
  const YAML::Node v = map[key];
  if (!v || v.IsNull()) return out;
  if (!v.IsSequence()) schema_error(v, key, "expected a list of strings");
  for (const auto& item : v) {
    if (!item.IsScalar()) schema_error(item, key, "expected a list of strings");
    out.push_back(item.Scalar());
  }
  return out;
}

bool optional_bool(const YAML::Node& map, const char* key, bool fallback) {
  const YAML::Node v = map[key];
  if (!v || v.IsNull()) return fallback;
  bool out = false;
  if (!v.IsScalar() || !YAML::convert<bool>::decode(v, out)) {
    schema_error(v, key, "expected a boolean");
  }
  return out;
}

int optional_int(const YAML::Node& map, const char* key, int fallback) {
  const YAML::Node v = map[key];
  if (!v || v.IsNull()) return fallback;
  int out = 0;
  if (!v.IsScalar() || !YAML::convert<int>::decode(v, out)) {
    schema_error(v, key, "expected an integer");
  }
  return out;
}

double optional_double(const YAML::Node& map, const char* key, double fallback) {
  const YAML::Node v = map[key];
  if (!v || v.IsNull()) return fallback;
  double out = 0;
  if (!v.IsScalar() || !YAML::convert<double>::decode(v, out)) {
    schema_error(v, key, "expected a number");
  }
  return out;
}

std::vector<UnknownKey> unknown_keys(const YAML::Node& map,
                                     std::span<const std::string_view> allowed) {
  std::vector<UnknownKey> out;
  for (const auto& kv : map) {
    const std::string key = kv.first.Scalar();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      out.push_back({key, line_of(kv.first)});
    }
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(Errc::io, "cannot read " + path);
  return ss.str();
}

}  // namespace injectlab::detail
