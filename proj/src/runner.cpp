#include "injectlab/runner.hpp"

#include <atomic>
#include <exception>
#include <nlohmann/json.hpp>
#include <thread>

#include "injectlab/error.hpp"
#include "injectlab/timeutil.hpp"

namespace injectlab {

using nlohmann::json;

namespace {

std::string_view role_name(MatcherRole r) {
  return r == MatcherRole::expected ? "expected" : "vulnerable";
}

}  // namespace

json to_json(const RunRecord& r) {
  json hits = json::array();
  for (const auto& h : r.verdict.matched_patterns) {
    hits.push_back({{"role", role_name(h.role)}, {"index", h.index}});
  }
  json verdict = {{"outcome", to_string(r.verdict.outcome)}, {"matched_patterns", hits}};
  verdict["note"] = r.verdict.note ? json(*r.verdict.note) : json(nullptr);
  json j = {{"run_id", r.run_id},
            {"session_id", r.session_id},
            {"technique_id", r.technique_id.str()},
            {"rule_file", r.rule_file},
            {"case_index", r.case_index},
            {"prompt", r.prompt},
            {"response_text", r.response_text},
            {"verdict", verdict},
            {"adapter_id", r.adapter_id},
            {"started_at", r.started_at},
            {"latency_ms", r.latency.count()}};
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  return j;
}

RunRecord run_record_from_json(const json& j) {
  try {
    RunRecord r;
    r.run_id = j.at("run_id").get<std::uint64_t>();
    r.session_id = j.at("session_id").get<std::string>();
    r.technique_id = parse_technique_id(j.at("technique_id").get<std::string>());
    r.rule_file = j.at("rule_file").get<std::string>();
    r.case_index = j.at("case_index").get<std::size_t>();
    r.prompt = j.at("prompt").get<std::string>();
    r.response_text = j.at("response_text").get<std::string>();
    const json& v = j.at("verdict");
    const auto outcome = outcome_from(v.at("outcome").get<std::string>());
    if (!outcome) throw Error(Errc::parse, "unknown outcome");
    r.verdict.outcome = *outcome;
    for (const auto& h : v.at("matched_patterns")) {
      const auto role = h.at("role").get<std::string>();
      if (role != "expected" && role != "vulnerable") throw Error(Errc::parse, "unknown role");
      r.verdict.matched_patterns.push_back(
          {role == "expected" ? MatcherRole::expected : MatcherRole::vulnerable,
           h.at("index").get<int>()});
    }
    if (v.contains("note") && !v["note"].is_null()) r.verdict.note = v["note"].get<std::string>();
    r.adapter_id = j.at("adapter_id").get<std::string>();
    r.started_at = j.at("started_at").get<std::string>();
    r.latency = std::chrono::milliseconds{j.at("latency_ms").get<long long>()};
    if (j.contains("error") && !j["error"].is_null()) r.error = j["error"].get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::parse, e.what());
  }
}

std::string serialize_record(const RunRecord& r) { return to_json(r).dump(); }

bool valid_session_id(std::string_view id) {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  for (const char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    if (!ok) return false;
  }
  return true;
}

std::string make_session_id() {
  // 2025-04-01T12:00:00.123Z -> session-20250401T120000123Z
  std::string out = "session-";
  for (const char c : rfc3339_now()) {
    if (c != '-' && c != ':' && c != '.') out.push_back(c);
  }
  return out;
}

Session::Session(std::filesystem::path store_dir, std::string session_id, std::string adapter_id)
    : id_(std::move(session_id)), adapter_id_(std::move(adapter_id)) {
  if (!valid_session_id(id_)) throw Error(Errc::config, "invalid session id '" + id_ + "'");
  std::error_code ec;
  std::filesystem::create_directories(store_dir, ec);
  if (ec) throw Error(Errc::store, "cannot create store directory " + store_dir.string());
  path_ = store_dir / (id_ + ".jsonl");
  if (std::filesystem::exists(path_)) {
    auto existing = load_session(id_, store_dir);
    records_ = std::move(existing.records);
    for (const auto& r : records_) next_run_id_ = std::max(next_run_id_, r.run_id + 1);
  }
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw Error(Errc::store, "cannot open " + path_.string() + " for append");
}

RunRecord Session::append(RunRecord record) {
  std::lock_guard lock(mu_);
  record.run_id = next_run_id_;
  record.session_id = id_;
  out_ << serialize_record(record) << '\n';
  out_.flush();
  if (!out_) throw Error(Errc::store, "write to " + path_.string() + " failed");
  ++next_run_id_;
  records_.push_back(record);
  return record;
}

std::vector<RunRecord> Session::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

RunRecord execute_case(const AdapterConfig& adapter, const TestRule& rule, std::size_t case_index) {
  if (case_index >= rule.tests.size()) {
    throw Error(Errc::index_out_of_range, "case index " + std::to_string(case_index) +
                                              " out of range for " + rule.id.str() + " (" +
                                              std::to_string(rule.tests.size()) + " cases)");
  }
  const TestCase& tc = rule.tests[case_index];
  RunRecord r;
  r.technique_id = rule.id;
  r.rule_file = rule.source_file.string();
  r.case_index = case_index;
  r.prompt = tc.prompt;
  r.adapter_id = adapter.id;
  r.started_at = rfc3339_now();
  try {
    const ModelResponse resp = complete(adapter, tc.system_prompt, tc.prompt);
    r.response_text = resp.text;
    r.latency = resp.latency;
  } catch (const std::exception& e) {
    r.error = e.what();
    r.verdict.note = "adapter error";
    return r;
  }
  if (tc.runnable()) {
    r.verdict = classify(r.response_text, tc);
  } else {
    r.verdict.note = "no behavior matchers; response captured only";
  }
  return r;
}

RunRecord run_case(const AdapterConfig& adapter, const TestRule& rule, std::size_t case_index,
                   Session& session) {
  return session.append(execute_case(adapter, rule, case_index));
}

SuiteRun run_suite(const AdapterConfig& adapter, const std::vector<TestRule>& rules,
                   Session& session, int parallelism) {
  struct Job {
    const TestRule* rule;
    std::size_t case_index;
  };
  SuiteRun out;
  std::vector<Job> jobs;
  for (const auto& rule : rules) {
    for (std::size_t i = 0; i < rule.tests.size(); ++i) {
      if (rule.tests[i].runnable()) {
        jobs.push_back({&rule, i});
      } else {
        out.skips.push_back({rule.id, rule.source_file.string(), i, "no behavior matchers"});
      }
    }
  }
  if (jobs.empty()) return out;

  // Results are committed to the store strictly in job order: whichever
  // worker completes the job at the commit frontier flushes the ready run.
  std::vector<std::optional<RunRecord>> done(jobs.size());
  std::size_t frontier = 0;
  std::mutex commit_mu;
  std::exception_ptr failure;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      RunRecord r = execute_case(adapter, *jobs[i].rule, jobs[i].case_index);
      std::lock_guard lock(commit_mu);
      if (failure) return;
      done[i] = std::move(r);
      try {
        while (frontier < jobs.size() && done[frontier]) {
          out.records.push_back(session.append(std::move(*done[frontier])));
          done[frontier].reset();
          ++frontier;
        }
      } catch (...) {
        failure = std::current_exception();
        next.store(jobs.size());
        return;
      }
    }
  };

  const int n = std::max(1, std::min<int>(parallelism, static_cast<int>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

LoadedSession load_session(std::string_view session_id, const std::filesystem::path& store_dir) {
  if (!valid_session_id(session_id)) {
    throw Error(Errc::not_found, "no session '" + std::string(session_id) + "'");
  }
  const auto path = store_dir / (std::string(session_id) + ".jsonl");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "no session '" + std::string(session_id) + "'");

  LoadedSession out;
  out.session_id = std::string(session_id);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      out.corrupt.push_back("line " + std::to_string(lineno) + ": not a JSON object");
      continue;
    }
    try {
      out.records.push_back(run_record_from_json(j));
    } catch (const Error& e) {
      out.corrupt.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!out.records.empty()) out.adapter_id = out.records.front().adapter_id;
  return out;
}

}  // namespace injectlab
