#include "injectlab/adapter.hpp"

#include <httplib.h>

#include <cstdlib>
#include <nlohmann/json.hpp>
#include <thread>

#include "injectlab/error.hpp"
#include "injectlab/verdict.hpp"
#include "matcher_yaml.hpp"
#include "yaml_util.hpp"

namespace injectlab {

using nlohmann::json;
using std::chrono::milliseconds;
using Clock = std::chrono::steady_clock;

namespace {

MockScript mock_script_from(const YAML::Node& node) {
  if (!node.IsMap()) throw Error(Errc::parse, "mock script must be a mapping", detail::line_of(node));
  for (const auto& u : detail::unknown_keys(node, {"entries", "default_reply"})) {
    throw Error(Errc::schema, "unknown key '" + u.key + "' in mock script", u.line);
  }
  MockScript s;
  if (!node["default_reply"]) detail::schema_error(node, "default_reply", "required field is missing");
  s.default_reply = detail::required_string(node, "default_reply");
  const YAML::Node entries = node["entries"];
  if (entries && !entries.IsNull()) {
    if (!entries.IsSequence()) detail::schema_error(entries, "entries", "expected a list");
    for (const auto& e : entries) {
      if (!e.IsMap() || !e["match"]) detail::schema_error(e, "entries", "expected {match, reply}");
      s.entries.push_back({detail::parse_pattern(e["match"]), detail::required_string(e, "reply")});
    }
  }
  return s;
}

std::string strip_one_newline(std::string s) {
  if (!s.empty() && s.back() == '\n') {
    s.pop_back();
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }
  return s;
}

ModelResponse complete_mock(const AdapterConfig& adapter, const std::string& user_prompt) {
  if (!adapter.script) throw Error(Errc::config, "mock adapter '" + adapter.id + "' has no script");
  for (const auto& entry : adapter.script->entries) {
    if (match_text(BehaviorMatcher{MatchMode::any, {entry.match}}, user_prompt).matched) {
      return {strip_one_newline(entry.reply), milliseconds{0}, false, std::nullopt};
    }
  }
  return {strip_one_newline(adapter.script->default_reply), milliseconds{0}, false, std::nullopt};
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // request path
};

Endpoint split_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(Errc::config, "base_url must start with http:// or https://");
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = base_url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  e.path = prefix + "/chat/completions";
  return e;
}

void set_timeouts(httplib::Client& cli, milliseconds budget) {
  const auto sec = std::chrono::duration_cast<std::chrono::seconds>(budget);
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(budget - sec);
  cli.set_connection_timeout(sec.count(), usec.count());
  cli.set_read_timeout(sec.count(), usec.count());
  cli.set_write_timeout(sec.count(), usec.count());
}

ModelResponse complete_http(const AdapterConfig& adapter,
                            const std::optional<std::string>& system_prompt,
                            const std::string& user_prompt, milliseconds timeout) {
  if (!adapter.base_url || !adapter.model_name) {
    throw Error(Errc::config, "http_chat adapter '" + adapter.id + "' needs base_url and model_name");
  }
  std::optional<std::string> key;
  if (adapter.api_key_env) {
    const char* value = std::getenv(adapter.api_key_env->c_str());
    if (!value) {
      throw Error(Errc::missing_credential,
                  "environment variable " + *adapter.api_key_env + " is not set");
    }
    key = value;
  }

  json messages = json::array();
  if (system_prompt) messages.push_back({{"role", "system"}, {"content", *system_prompt}});
  messages.push_back({{"role", "user"}, {"content", user_prompt}});
  const json body = {{"model", *adapter.model_name}, {"temperature", 0}, {"messages", messages}};
  const std::string payload = body.dump();

  const Endpoint ep = split_url(*adapter.base_url);
  httplib::Headers headers;
  if (key) headers.emplace("Authorization", "Bearer " + *key);

  const auto start = Clock::now();
  const auto deadline = start + timeout;
  for (int attempt = 0;; ++attempt) {
    const auto remaining = std::chrono::duration_cast<milliseconds>(deadline - Clock::now());
    if (remaining <= milliseconds{0}) {
      throw Error(Errc::timeout, "request to adapter '" + adapter.id + "' timed out");
    }
    httplib::Client cli(ep.origin);
    if (!cli.is_valid()) {
      throw Error(Errc::transport, "cannot create client for " + ep.origin +
                                       " (https requires a TLS-enabled build)");
    }
    set_timeouts(cli, remaining);
    const auto attempt_start = Clock::now();
    auto res = cli.Post(ep.path, headers, payload, "application/json");

    std::optional<Error> failure;
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             (err == httplib::Error::Read && Clock::now() - attempt_start >= remaining);
      if (timed_out) throw Error(Errc::timeout, "request to adapter '" + adapter.id + "' timed out");
      failure = Error(Errc::transport, "adapter '" + adapter.id + "': " + httplib::to_string(err));
    } else if (res->status == 401 || res->status == 403) {
      throw Error(Errc::auth, "adapter '" + adapter.id + "' rejected credentials (HTTP " +
                                  std::to_string(res->status) + ")");
    } else if (res->status >= 400 && res->status < 500) {
      throw Error(Errc::transport, "adapter '" + adapter.id + "' returned HTTP " +
                                       std::to_string(res->status));
    } else if (res->status < 200 || res->status >= 300) {
      failure = Error(Errc::transport, "adapter '" + adapter.id + "' returned HTTP " +
                                           std::to_string(res->status));
    } else {
      const json doc = json::parse(res->body, nullptr, false);
      const json* content = nullptr;
      if (!doc.is_discarded() && doc.contains("choices") && doc["choices"].is_array() &&
          !doc["choices"].empty() && doc["choices"][0].is_object()) {
        const json& choice = doc["choices"][0];
        if (choice.contains("message") && choice["message"].is_object() &&
            choice["message"].contains("content") && choice["message"]["content"].is_string()) {
          content = &choice["message"]["content"];
        }
      }
      if (!content) {
        throw Error(Errc::protocol,
                    "adapter '" + adapter.id + "' returned no choices[0].message.content");
      }
      ModelResponse out;
      out.text = strip_one_newline(content->get<std::string>());
      out.latency = std::chrono::duration_cast<milliseconds>(Clock::now() - start);
      out.raw_status = res->status;
      const json& choice = doc["choices"][0];
      out.truncated = choice.contains("finish_reason") && choice["finish_reason"] == "length";
      return out;
    }

    if (attempt >= 1) throw *failure;
    if (Clock::now() + adapter.retry_backoff >= deadline) throw *failure;
    std::this_thread::sleep_for(adapter.retry_backoff);
  }
}

}  // namespace

MockScript parse_mock_script(std::string_view text) {
  return mock_script_from(detail::load_document(text));
}

MockScript load_mock_script(const std::filesystem::path& path) {
  return parse_mock_script(detail::read_file(path.string()));
}

ModelResponse complete(const AdapterConfig& adapter, const std::optional<std::string>& system_prompt,
                       const std::string& user_prompt, milliseconds timeout) {
  if (user_prompt.empty()) throw Error(Errc::config, "user prompt must not be empty");
  if (adapter.kind == AdapterKind::mock) return complete_mock(adapter, user_prompt);
  return complete_http(adapter, system_prompt, user_prompt, timeout);
}

std::vector<AdapterConfig> parse_adapters(std::string_view text,
                                          const std::filesystem::path& base_dir) {
  const YAML::Node root = detail::load_document(text);
  if (!root.IsMap() || !root["adapters"] || !root["adapters"].IsSequence()) {
    throw Error(Errc::parse, "adapter config needs a top-level 'adapters' list",
                detail::line_of(root));
  }
  std::vector<AdapterConfig> out;
  for (const auto& node : root["adapters"]) {
    if (!node.IsMap()) throw Error(Errc::parse, "adapter entry must be a mapping", detail::line_of(node));
    auto fail = [&](const std::string& field, const std::string& what) -> void {
      throw Error(Errc::parse, "field '" + field + "': " + what, detail::line_of(node));
    };
    for (const auto& u : detail::unknown_keys(node, {"id", "kind", "base_url", "model_name",
                                                     "api_key_env", "timeout", "script_path",
                                                     "script"})) {
      throw Error(Errc::parse, "unknown adapter key '" + u.key + "'", u.line);
    }
    AdapterConfig a;
    try {
      a.id = detail::required_string(node, "id");
      const std::string kind = detail::required_string(node, "kind");
      if (kind == "mock") {
        a.kind = AdapterKind::mock;
      } else if (kind == "http_chat") {
        a.kind = AdapterKind::http_chat;
      } else {
        fail("kind", "expected 'mock' or 'http_chat'");
      }
      a.base_url = detail::optional_string(node, "base_url");
      a.model_name = detail::optional_string(node, "model_name");
      a.api_key_env = detail::optional_string(node, "api_key_env");
      const double seconds = detail::optional_double(node, "timeout", 30.0);
      if (seconds <= 0) fail("timeout", "must be positive (seconds)");
      a.timeout = milliseconds{static_cast<long long>(seconds * 1000)};
      if (auto p = detail::optional_string(node, "script_path")) a.script_path = base_dir / *p;
    } catch (const Error& e) {
      if (e.code() != Errc::schema) throw;
      throw Error(Errc::parse, e.what(), e.line());
    }

    if (a.kind == AdapterKind::http_chat) {
      if (!a.base_url) fail("base_url", "required for http_chat adapters");
      if (!a.model_name) fail("model_name", "required for http_chat adapters");
      if (a.base_url->find("://") == std::string::npos) fail("base_url", "expected an http(s) URL");
    } else {
      if (node["script"]) {
        a.script = mock_script_from(node["script"]);
      } else if (a.script_path) {
        a.script = load_mock_script(*a.script_path);
      } else {
        fail("script_path", "mock adapters need script_path or an inline script");
      }
    }
    if (find_adapter(out, a.id)) {
      throw Error(Errc::duplicate_adapter_id, "duplicate adapter id '" + a.id + "'",
                  detail::line_of(node));
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<AdapterConfig> list_adapters(const std::filesystem::path& config_file) {
  return parse_adapters(detail::read_file(config_file.string()), config_file.parent_path());
}

const AdapterConfig* find_adapter(const std::vector<AdapterConfig>& adapters, std::string_view id) {
  for (const auto& a : adapters) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

}  // namespace injectlab
