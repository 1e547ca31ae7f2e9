#pragma once

// Executes test cases against adapters and persists RunRecords to an
// append-only JSONL session store: <store_dir>/<session_id>.jsonl

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "injectlab/adapter.hpp"
#include "injectlab/rule.hpp"
#include "injectlab/verdict.hpp"

namespace injectlab {

struct RunRecord {
  std::uint64_t run_id = 0;
  std::string session_id;
  TechniqueId technique_id{Tactic::PI, 1};
  std::string rule_file;
  std::size_t case_index = 0;
  std::string prompt;
  std::string response_text;
  Verdict verdict;
  std::string adapter_id;
  std::string started_at;  // RFC 3339 UTC
  std::chrono::milliseconds latency{0};
  std::optional<std::string> error;

  bool operator==(const RunRecord&) const = default;
};

nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

// One record per line, compact JSON, no trailing spaces.
std::string serialize_record(const RunRecord& r);

bool valid_session_id(std::string_view id);
std::string make_session_id();

// A session bound to its store file. Appends are serialized; records()
// returns a consistent prefix while a writer is active.
class Session {
 public:
  /// Opens or creates `<store_dir>/<session_id>.jsonl`, continuing run ids
  /// after any records already present. Throws Error{config, store}.
  Session(std::filesystem::path store_dir, std::string session_id, std::string adapter_id);

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const noexcept { return id_; }
  const std::string& adapter_id() const noexcept { return adapter_id_; }
  const std::filesystem::path& path() const noexcept { return path_; }

  /// Assigns the next run_id and session_id, persists, and returns the stored
  /// record. Throws Error{store}.
  RunRecord append(RunRecord record);

  std::vector<RunRecord> records() const;

 private:
  std::filesystem::path path_;
  std::string id_;
  std::string adapter_id_;
  mutable std::mutex mu_;
  std::ofstream out_;
  std::vector<RunRecord> records_;
  std::uint64_t next_run_id_ = 1;
};

/// Calls the adapter and classifies, without persisting. Adapter failures
/// land in the record's error field with an INDETERMINATE verdict.
RunRecord execute_case(const AdapterConfig& adapter, const TestRule& rule, std::size_t case_index);

/// Throws Error{index_out_of_range} or Error{store}.
RunRecord run_case(const AdapterConfig& adapter, const TestRule& rule, std::size_t case_index,
                   Session& session);

struct SkipNote {
  TechniqueId technique_id;
  std::string rule_file;
  std::size_t case_index;
  std::string reason;

  bool operator==(const SkipNote&) const = default;
};

struct SuiteRun {
  std::vector<RunRecord> records;
  std::vector<SkipNote> skips;
};

/// Runs every case with at least one matcher. Records are persisted and
/// returned in (rule order, case index) order for any parallelism.
SuiteRun run_suite(const AdapterConfig& adapter, const std::vector<TestRule>& rules,
                   Session& session, int parallelism = 1);

struct LoadedSession {
  std::string session_id;
  std::string adapter_id;
  std::vector<RunRecord> records;
  // "line N: reason" for each corrupt line; those lines are skipped.
  std::vector<std::string> corrupt;
};

/// Throws Error{not_found}.
LoadedSession load_session(std::string_view session_id, const std::filesystem::path& store_dir);

}  // namespace injectlab
