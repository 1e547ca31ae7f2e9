#pragma once

// Run summaries (JSON + Markdown) and the static matrix page.

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "injectlab/matrix.hpp"
#include "injectlab/runner.hpp"

namespace injectlab {

struct TechniqueTally {
  int safe = 0;
  int vulnerable = 0;
  int indeterminate = 0;
  int skipped = 0;

  int total() const { return safe + vulnerable + indeterminate + skipped; }
  bool operator==(const TechniqueTally&) const = default;
};

struct SuiteSummary {
  std::string session_id;
  std::string adapter_id;
  std::string generated_at;
  // Keys: SAFE, VULNERABLE, INDETERMINATE, SKIPPED.
  std::map<std::string, int> counts;
  std::map<TechniqueId, TechniqueTally> per_technique;

  bool operator==(const SuiteSummary&) const = default;
};

/// `generated_at` is an input so output stays reproducible.
SuiteSummary summarize(const std::vector<RunRecord>& records, const std::vector<SkipNote>& skips,
                       std::string session_id, std::string adapter_id, std::string generated_at);

nlohmann::json to_json(const SuiteSummary& s);
SuiteSummary summary_from_json(const nlohmann::json& j);

std::string render_markdown(const SuiteSummary& summary, const Matrix& matrix);

std::string export_matrix_html(const Matrix& matrix, const CoverageMap& coverage);

}  // namespace injectlab
