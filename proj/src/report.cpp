#include "injectlab/report.hpp"

#include <nlohmann/json.hpp>
#include <sstream>

#include "injectlab/error.hpp"

namespace injectlab {

using nlohmann::json;

namespace {

constexpr const char* kOutcomeKeys[] = {"SAFE", "VULNERABLE", "INDETERMINATE", "SKIPPED"};

std::map<std::string, int> zero_counts() {
  std::map<std::string, int> m;
  for (const char* k : kOutcomeKeys) m[k] = 0;
  return m;
}

// Markdown table cells cannot contain raw pipes or newlines.
std::string md_cell(const std::string& s) {
  std::string out;
  for (const char c : s) {
    if (c == '|') {
      out += "\\|";
    } else if (c == '\n' || c == '\r') {
      out += ' ';
    } else {
      out += c;
    }
  }
  return out;
}

std::string html_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

void tally_row(std::ostringstream& md, const std::string& id, const std::string& name,
               const TechniqueTally& t) {
  md << "| " << id << " | " << md_cell(name) << " | " << t.safe << " | " << t.vulnerable << " | "
     << t.indeterminate << " | " << t.skipped << " |\n";
}

constexpr const char* kTallyHeader =
    "| Technique | Name | Safe | Vulnerable | Indeterminate | Skipped |\n"
    "|---|---|---:|---:|---:|---:|\n";

}  // namespace

SuiteSummary summarize(const std::vector<RunRecord>& records, const std::vector<SkipNote>& skips,
                       std::string session_id, std::string adapter_id, std::string generated_at) {
  SuiteSummary s;
  s.session_id = std::move(session_id);
  s.adapter_id = std::move(adapter_id);
  s.generated_at = std::move(generated_at);
  s.counts = zero_counts();
  for (const auto& r : records) {
    ++s.counts[std::string(to_string(r.verdict.outcome))];
    auto& t = s.per_technique[r.technique_id];
    switch (r.verdict.outcome) {
      case Outcome::SAFE: ++t.safe; break;
      case Outcome::VULNERABLE: ++t.vulnerable; break;
      case Outcome::INDETERMINATE: ++t.indeterminate; break;
    }
  }
  for (const auto& skip : skips) {
    ++s.counts["SKIPPED"];
    ++s.per_technique[skip.technique_id].skipped;
  }
  return s;
}

json to_json(const SuiteSummary& s) {
  json per = json::object();
  for (const auto& [id, t] : s.per_technique) {
    per[id.str()] = {{"safe", t.safe},
                     {"vulnerable", t.vulnerable},
                     {"indeterminate", t.indeterminate},
                     {"skipped", t.skipped}};
  }
  return {{"session_id", s.session_id},
          {"adapter_id", s.adapter_id},
          {"generated_at", s.generated_at},
          {"counts", s.counts},
          {"per_technique", per}};
}

SuiteSummary summary_from_json(const json& j) {
  try {
    SuiteSummary s;
    s.session_id = j.at("session_id").get<std::string>();
    s.adapter_id = j.at("adapter_id").get<std::string>();
    s.generated_at = j.at("generated_at").get<std::string>();
    s.counts = j.at("counts").get<std::map<std::string, int>>();
    for (const auto& [id, t] : j.at("per_technique").items()) {
      s.per_technique[parse_technique_id(id)] =
          TechniqueTally{t.at("safe").get<int>(), t.at("vulnerable").get<int>(),
                         t.at("indeterminate").get<int>(), t.at("skipped").get<int>()};
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::parse, e.what());
  }
}

std::string render_markdown(const SuiteSummary& summary, const Matrix& matrix) {
  std::ostringstream md;
  md << "# InjectLab Report\n\n";
  md << "- Session: `" << summary.session_id << "`\n";
  md << "- Adapter: `" << summary.adapter_id << "`\n";
  md << "- Generated: " << summary.generated_at << "\n";
  md << "- Catalog version: " << matrix.version << "\n\n";

  md << "## Totals\n\n| Outcome | Count |\n|---|---:|\n";
  int total = 0;
  for (const char* key : kOutcomeKeys) {
    const auto it = summary.counts.find(key);
    const int n = it == summary.counts.end() ? 0 : it->second;
    total += n;
    md << "| " << key << " | " << n << " |\n";
  }
  md << "| **Total** | " << total << " |\n";

  for (const Tactic tactic : matrix.tactics) {
    bool header = false;
    for (const auto& [id, tally] : summary.per_technique) {
      if (id.tactic() != tactic || !matrix.find(id)) continue;
      if (!header) {
        md << "\n## " << tactic_name(tactic) << " (" << tactic_code(tactic) << ")\n\n"
           << kTallyHeader;
        header = true;
      }
      tally_row(md, id.str(), matrix.find(id)->name, tally);
    }
  }

  bool unknown = false;
  for (const auto& [id, tally] : summary.per_technique) {
    if (matrix.find(id)) continue;
    if (!unknown) {
      md << "\n## Unknown techniques\n\n" << kTallyHeader;
      unknown = true;
    }
    tally_row(md, id.str(), "", tally);
  }
  return md.str();
}

std::string export_matrix_html(const Matrix& matrix, const CoverageMap& coverage) {
  std::ostringstream h;
  h << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
    << "<title>InjectLab Matrix</title>\n</head>\n"
    << "<body style=\"font-family:sans-serif;margin:1.5em;color:#222\">\n"
    << "<h1>InjectLab Matrix</h1>\n";
  if (!matrix.version.empty()) {
    h << "<p>Catalog version " << html_escape(matrix.version) << "</p>\n";
  }

  if (matrix.tactics.empty() || matrix.techniques.empty()) {
    h << "<p class=\"notice\">The catalog contains no techniques.</p>\n</body>\n</html>\n";
    return h.str();
  }

  h << "<div class=\"matrix\" style=\"display:flex;gap:0.5em;align-items:flex-start\">\n";
  for (const Tactic tactic : matrix.tactics) {
    h << "<div class=\"tactic\" data-tactic=\"" << tactic_code(tactic)
      << "\" style=\"flex:1;min-width:10em\">\n"
      << "<h2 style=\"font-size:1em;background:#333;color:#fff;padding:0.4em;margin:0\">"
      << html_escape(tactic_name(tactic)) << " (" << tactic_code(tactic) << ")</h2>\n";
    for (const Technique* t : matrix.techniques_of(tactic)) {
      const std::string id = t->id.str();
      const int n = coverage.count(t->id);
      h << "<a class=\"technique\" href=\"#" << id
        << "\" style=\"display:block;border:1px solid #bbb;padding:0.4em;margin-top:0.3em;"
        << "text-decoration:none;color:inherit;background:" << (n > 0 ? "#eef6ee" : "#f6eeee")
        << "\"><strong>" << id << "</strong><br>" << html_escape(t->name)
        << "<br><span class=\"coverage\" title=\"test rules\">" << n << "</span></a>\n";
    }
    h << "</div>\n";
  }
  h << "</div>\n";

  for (const Tactic tactic : matrix.tactics) {
    for (const Technique* t : matrix.techniques_of(tactic)) {
      const std::string id = t->id.str();
      h << "<section id=\"" << id << "\" style=\"margin-top:2em\">\n<h3>" << id << " "
        << html_escape(t->name) << "</h3>\n<p>" << html_escape(t->description) << "</p>\n";
      auto list = [&](const char* title, const std::vector<std::string>& items) {
        if (items.empty()) return;
        h << "<h4>" << title << "</h4>\n<ul>\n";
        for (const auto& item : items) h << "<li>" << html_escape(item) << "</li>\n";
        h << "</ul>\n";
      };
      list("Detection heuristics", t->detection_heuristics);
      list("Mitigations", t->mitigations);
      h << "<p>Test rules: " << coverage.count(t->id) << "</p>\n</section>\n";
    }
  }
  h << "</body>\n</html>\n";
  return h.str();
}

}  // namespace injectlab
