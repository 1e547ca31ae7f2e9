#include "injectlab/matrix.hpp"

#include <algorithm>
#include <cstdio>

#include "injectlab/error.hpp"
#include "injectlab/rule.hpp"
#include "yaml_util.hpp"

namespace injectlab {

namespace {

struct TacticInfo {
  Tactic tactic;
  std::string_view code;
  std::string_view name;
};

constexpr std::array<TacticInfo, 6> kTactics{{
    {Tactic::PI, "PI", "Prompt Injection"},
    {Tactic::RO, "RO", "Role Override"},
    {Tactic::EH, "EH", "Execution Hijack"},
    {Tactic::ID, "ID", "Identity Deception"},
    {Tactic::OM, "OM", "Output Manipulation"},
    {Tactic::MA, "MA", "Multi-Agent Exploitation"},
}};

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

std::string_view tactic_code(Tactic t) { return kTactics[static_cast<std::size_t>(t)].code; }
std::string_view tactic_name(Tactic t) { return kTactics[static_cast<std::size_t>(t)].name; }

std::optional<Tactic> tactic_from_code(std::string_view code) {
  for (const auto& info : kTactics) {
    if (info.code == code) return info.tactic;
  }
  return std::nullopt;
}

TechniqueId::TechniqueId(Tactic tactic, int number) : tactic_(tactic), number_(number) {
  if (number < 1 || number > 999) {
    throw Error(Errc::malformed_id, "technique number out of range: " + std::to_string(number));
  }
}

std::string TechniqueId::str() const {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%03d", number_);
  return std::string(tactic_code(tactic_)) + "-T" + buf;
}

TechniqueId parse_technique_id(std::string_view text) {
  const bool shape = text.size() == 7 && is_upper(text[0]) && is_upper(text[1]) &&
                     text[2] == '-' && text[3] == 'T' && is_digit(text[4]) &&
                     is_digit(text[5]) && is_digit(text[6]);
  if (!shape) {
    throw Error(Errc::malformed_id, "malformed technique id '" + std::string(text) +
                                        "' (expected XX-TNNN)");
  }
  const auto tactic = tactic_from_code(text.substr(0, 2));
  if (!tactic) {
    throw Error(Errc::unknown_tactic, "unknown tactic code '" + std::string(text.substr(0, 2)) +
                                          "' in '" + std::string(text) + "'");
  }
  const int number = (text[4] - '0') * 100 + (text[5] - '0') * 10 + (text[6] - '0');
  if (number == 0) throw Error(Errc::malformed_id, "technique number must be positive");
  return TechniqueId(*tactic, number);
}

const Technique* Matrix::find(const TechniqueId& id) const {
  const auto it = techniques.find(id);
  return it == techniques.end() ? nullptr : &it->second;
}

std::vector<const Technique*> Matrix::techniques_of(Tactic t) const {
  std::vector<const Technique*> out;
  // map order is (tactic, number), so one tactic is a contiguous run
  for (const auto& [id, tech] : techniques) {
    if (id.tactic() == t) out.push_back(&tech);
  }
  return out;
}

const Technique& lookup_technique(const Matrix& matrix, const TechniqueId& id) {
  if (const auto* t = matrix.find(id)) return *t;
  throw Error(Errc::not_found, "technique " + id.str() + " not in matrix");
}

namespace {

void reject_unknown(const YAML::Node& map, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  const auto unknown = detail::unknown_keys(map, allowed);
  if (!unknown.empty()) {
    throw Error(Errc::schema, "unknown key '" + unknown.front().key + "' in " + where,
                unknown.front().line);
  }
}

TechniqueId technique_id_at(const YAML::Node& node, const std::string& text) {
  try {
    return parse_technique_id(text);
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), detail::line_of(node));
  }
}

}  // namespace

Matrix parse_catalog(std::string_view text) {
  const YAML::Node root = detail::load_document(text);
  if (!root.IsMap()) throw Error(Errc::parse, "catalog must be a mapping", detail::line_of(root));
  reject_unknown(root, {"version", "tactics", "techniques"}, "catalog");

  Matrix m;
  m.version = detail::required_string(root, "version");

  const YAML::Node tactics = root["tactics"];
  if (!tactics || !tactics.IsSequence()) {
    detail::schema_error(root, "tactics", "expected a list of {code, name}");
  }
  for (const auto& entry : tactics) {
    if (!entry.IsMap()) detail::schema_error(entry, "tactics", "expected {code, name}");
    reject_unknown(entry, {"code", "name"}, "tactic entry");
    const std::string code = detail::required_string(entry, "code");
    const std::string name = detail::required_string(entry, "name");
    const auto tactic = tactic_from_code(code);
    if (!tactic) {
      throw Error(Errc::unknown_tactic, "unknown tactic code '" + code + "'",
                  detail::line_of(entry));
    }
    if (name != tactic_name(*tactic)) {
      detail::schema_error(entry, "name",
                           "tactic " + code + " must be named '" +
                               std::string(tactic_name(*tactic)) + "'");
    }
    if (std::find(m.tactics.begin(), m.tactics.end(), *tactic) != m.tactics.end()) {
      detail::schema_error(entry, "code", "tactic " + code + " listed twice");
    }
    m.tactics.push_back(*tactic);
  }

  const YAML::Node techniques = root["techniques"];
  if (techniques && !techniques.IsNull()) {
    if (!techniques.IsSequence()) detail::schema_error(techniques, "techniques", "expected a list");
    for (const auto& entry : techniques) {
      if (!entry.IsMap()) detail::schema_error(entry, "techniques", "expected a mapping");
      reject_unknown(entry,
                     {"id", "name", "tactic", "description", "detection_heuristics",
                      "mitigations", "provenance", "aliases"},
                     "technique entry");
      const TechniqueId id = technique_id_at(entry["id"], detail::required_string(entry, "id"));
      const std::string tactic = detail::required_string(entry, "tactic");
      if (tactic != tactic_code(id.tactic())) {
        detail::schema_error(entry, "tactic",
                             "'" + tactic + "' does not match the prefix of " + id.str());
      }
      if (std::find(m.tactics.begin(), m.tactics.end(), id.tactic()) == m.tactics.end()) {
        detail::schema_error(entry, "tactic", "tactic " + tactic + " is not declared in tactics");
      }
      Technique t{id,
                  detail::required_string(entry, "name"),
                  detail::optional_string(entry, "description").value_or(""),
                  detail::string_list(entry, "detection_heuristics"),
                  detail::string_list(entry, "mitigations"),
                  detail::string_list(entry, "aliases"),
                  detail::optional_string(entry, "provenance").value_or("")};
      if (t.name.empty()) detail::schema_error(entry, "name", "must not be empty");
      if (!m.techniques.emplace(id, std::move(t)).second) {
        throw Error(Errc::duplicate_technique, "duplicate technique " + id.str(),
                    detail::line_of(entry));
      }
    }
  }
  return m;
}

Matrix load_catalog(const std::filesystem::path& path) {
  return parse_catalog(detail::read_file(path.string()));
}

int CoverageMap::count(const TechniqueId& id) const {
  const auto it = counts.find(id);
  return it == counts.end() ? 0 : it->second;
}

int CoverageMap::total() const {
  int sum = 0;
  for (const auto& [id, n] : counts) sum += n;
  return sum;
}

CoverageMap coverage(const Matrix& matrix, const std::vector<TestRule>& rules) {
  CoverageMap out;
  for (const auto& [id, tech] : matrix.techniques) out.counts.emplace(id, 0);
  for (const auto& rule : rules) {
    const auto it = out.counts.find(rule.id);
    if (it == out.counts.end()) {
      std::string where = rule.source_file.empty() ? "" : " (" + rule.source_file.string() + ")";
      out.warnings.push_back("rule targets " + rule.id.str() + " which is not in the matrix" +
                             where);
      continue;
    }
    ++it->second;
  }
  return out;
}

}  // namespace injectlab
