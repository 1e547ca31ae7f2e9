#pragma once

// Tactic/technique matrix: identifiers, catalog loading, lookup and coverage.

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace injectlab {

struct TestRule;

// Declaration order is the canonical display order of the matrix.
enum class Tactic : std::uint8_t { PI, RO, EH, ID, OM, MA };

inline constexpr std::array<Tactic, 6> kAllTactics{Tactic::PI, Tactic::RO, Tactic::EH,
                                                   Tactic::ID, Tactic::OM, Tactic::MA};

std::string_view tactic_code(Tactic t);
std::string_view tactic_name(Tactic t);
std::optional<Tactic> tactic_from_code(std::string_view code);

class TechniqueId {
 public:
  TechniqueId(Tactic tactic, int number);

  Tactic tactic() const noexcept { return tactic_; }
  int number() const noexcept { return number_; }

  // Canonical `<CODE>-T<NNN>` form.
  std::string str() const;

  friend auto operator<=>(const TechniqueId&, const TechniqueId&) = default;

 private:
  Tactic tactic_;
  int number_;
};

/// Parses `[A-Z]{2}-T[0-9]{3}` with a known tactic code.
/// Throws Error{malformed_id} or Error{unknown_tactic}.
TechniqueId parse_technique_id(std::string_view text);

struct Technique {
  TechniqueId id;
  std::string name;
  std::string description;
  std::vector<std::string> detection_heuristics;
  std::vector<std::string> mitigations;
  std::vector<std::string> aliases;
  std::string provenance;

  bool operator==(const Technique&) const = default;
};

struct Matrix {
  std::string version;
  std::vector<Tactic> tactics;
  std::map<TechniqueId, Technique> techniques;

  bool operator==(const Matrix&) const = default;

  const Technique* find(const TechniqueId& id) const;
  /// Techniques of one tactic in ascending number order.
  std::vector<const Technique*> techniques_of(Tactic t) const;
};

/// Throws Error{not_found}.
const Technique& lookup_technique(const Matrix& matrix, const TechniqueId& id);

// Catalog documents are strict: unknown keys are rejected by name.
Matrix load_catalog(const std::filesystem::path& path);
Matrix parse_catalog(std::string_view text);

struct CoverageMap {
  std::map<TechniqueId, int> counts;
  std::vector<std::string> warnings;

  int count(const TechniqueId& id) const;
  int total() const;
};

CoverageMap coverage(const Matrix& matrix, const std::vector<TestRule>& rules);

}  // namespace injectlab
