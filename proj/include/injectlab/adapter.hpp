#pragma once

// Model adapters: a deterministic scripted mock and a chat-completions
// HTTP client. Credentials are read from the environment at call time and
// never stored in a config value.

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "injectlab/rule.hpp"

namespace injectlab {

struct MockEntry {
  PatternSpec match;
  std::string reply;

  bool operator==(const MockEntry&) const = default;
};

struct MockScript {
  std::vector<MockEntry> entries;
  std::string default_reply;

  bool operator==(const MockScript&) const = default;
};

MockScript parse_mock_script(std::string_view text);
MockScript load_mock_script(const std::filesystem::path& path);

enum class AdapterKind { mock, http_chat };

struct AdapterConfig {
  std::string id;
  AdapterKind kind = AdapterKind::mock;
  std::optional<std::string> base_url;
  std::optional<std::string> model_name;
  std::optional<std::string> api_key_env;
  std::chrono::milliseconds timeout{30'000};
  std::optional<std::filesystem::path> script_path;
  // Inline or resolved from script_path by list_adapters.
  std::optional<MockScript> script;
  // Delay before the single retry after a transport failure.
  std::chrono::milliseconds retry_backoff{1'000};
};

struct ModelResponse {
  std::string text;
  std::chrono::milliseconds latency{0};
  bool truncated = false;
  std::optional<int> raw_status;
};

/// Mock: first matching script entry wins, else default_reply, latency 0.
/// http_chat: POST {base_url}/chat/completions with temperature 0.
/// Throws Error{timeout, transport, auth, protocol, missing_credential}.
ModelResponse complete(const AdapterConfig& adapter, const std::optional<std::string>& system_prompt,
                       const std::string& user_prompt, std::chrono::milliseconds timeout);

inline ModelResponse complete(const AdapterConfig& adapter,
                              const std::optional<std::string>& system_prompt,
                              const std::string& user_prompt) {
  return complete(adapter, system_prompt, user_prompt, adapter.timeout);
}

/// Reads `adapters:` from a YAML config; mock script paths resolve relative
/// to the config file. Throws Error{io, parse, schema, duplicate_adapter_id}.
std::vector<AdapterConfig> list_adapters(const std::filesystem::path& config_file);
std::vector<AdapterConfig> parse_adapters(std::string_view text,
                                          const std::filesystem::path& base_dir);

const AdapterConfig* find_adapter(const std::vector<AdapterConfig>& adapters, std::string_view id);

}  // namespace injectlab
