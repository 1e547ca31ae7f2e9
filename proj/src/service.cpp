#include "injectlab/service.hpp"

#include <httplib.h>

#include <map>
#include <mutex>
#include <nlohmann/json.hpp>

#include "injectlab/error.hpp"
#include "injectlab/runner.hpp"

namespace injectlab {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"code", code}, {"message", message}});
}

json matcher_json(const BehaviorMatcher& m) {
  json patterns = json::array();
  for (const auto& p : m.patterns) {
    json pj = {{"kind", to_string(p.kind)}, {"value", p.value}, {"case_sensitive", p.case_sensitive}};
    if (p.kind == PatternKind::keyword_set) pj["threshold"] = p.threshold;
    patterns.push_back(pj);
  }
  return {{"mode", to_string(m.mode)}, {"patterns", patterns}};
}

json rule_json(const TestRule& r) {
  json tests = json::array();
  for (const auto& c : r.tests) {
    json cj = {{"prompt", c.prompt}, {"runnable", c.runnable()}};
    if (c.name) cj["name"] = *c.name;
    if (c.system_prompt) cj["system_prompt"] = *c.system_prompt;
    if (c.expected_behavior) cj["expected_output"] = matcher_json(*c.expected_behavior);
    if (c.vulnerable_behavior) cj["vulnerable_output"] = matcher_json(*c.vulnerable_behavior);
    tests.push_back(cj);
  }
  json j = {{"id", r.id.str()},
            {"name", r.name},
            {"source_file", r.source_file.filename().string()},
            {"tests", tests}};
  if (r.description) j["description"] = *r.description;
  return j;
}

}  // namespace

struct Service::Impl {
  ServiceState state;
  httplib::Server server;
  std::string matrix_body;  // immutable after construction

  std::mutex sessions_mu;
  std::map<std::string, std::unique_ptr<Session>> sessions;

  explicit Impl(ServiceState s) : state(std::move(s)) {
    matrix_body = build_matrix().dump();
    // SO_REUSEPORT (the library default) would let a second server share a
    // busy port; only address reuse is wanted.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
  }

  json build_matrix() const {
    const CoverageMap cov = coverage(state.matrix, state.rules);
    json tactics = json::array();
    json techniques = json::array();
    for (const Tactic t : state.matrix.tactics) {
      tactics.push_back({{"code", tactic_code(t)}, {"name", tactic_name(t)}});
      for (const Technique* tech : state.matrix.techniques_of(t)) {
        techniques.push_back({{"id", tech->id.str()},
                              {"name", tech->name},
                              {"tactic", tactic_code(t)},
                              {"description", tech->description},
                              {"detection_heuristics", tech->detection_heuristics},
                              {"mitigations", tech->mitigations},
                              {"aliases", tech->aliases},
                              {"coverage", cov.count(tech->id)}});
      }
    }
    return {{"version", state.matrix.version}, {"tactics", tactics}, {"techniques", techniques}};
  }

  Session& session_for(const std::string& id, const std::string& adapter_id) {
    std::lock_guard lock(sessions_mu);
    auto& slot = sessions[id];
    if (!slot) slot = std::make_unique<Session>(state.store_dir, id, adapter_id);
    return *slot;
  }

  std::optional<std::vector<RunRecord>> live_records(const std::string& id) {
    std::lock_guard lock(sessions_mu);
    const auto it = sessions.find(id);
    if (it == sessions.end() || !it->second) return std::nullopt;
    return it->second->records();
  }

  void routes() {
    server.Get("/api/matrix", [this](const httplib::Request&, httplib::Response& res) {
      res.status = 200;
      res.set_content(matrix_body, "application/json");
    });

    server.Get("/api/adapters", [this](const httplib::Request&, httplib::Response& res) {
      json out = json::array();
      for (const auto& a : state.adapters) {
        json aj = {{"id", a.id}, {"kind", a.kind == AdapterKind::mock ? "mock" : "http_chat"}};
        if (a.model_name) aj["model_name"] = *a.model_name;
        out.push_back(aj);
      }
      send_json(res, 200, out);
    });

    server.Get(R"(/api/rules/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::optional<TechniqueId> id;
      try {
        id = parse_technique_id(req.matches[1].str());
      } catch (const Error& e) {
        return send_error(res, 400, to_string(e.code()), e.what());
      }
      json out = json::array();
      for (const auto& r : state.rules) {
        if (r.id == *id) out.push_back(rule_json(r));
      }
      if (out.empty()) return send_error(res, 404, "not_found", "no rules for " + id->str());
      send_json(res, 200, out);
    });

    server.Post("/api/runs", [this](const httplib::Request& req, httplib::Response& res) {
      handle_run(req, res);
    });

    server.Get(R"(/api/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1].str();
      std::vector<RunRecord> records;
      if (auto live = live_records(id)) {
        records = std::move(*live);
      } else {
        try {
          records = load_session(id, state.store_dir).records;
        } catch (const Error& e) {
          if (e.code() == Errc::not_found) return send_error(res, 404, "not_found", e.what());
          return send_error(res, 500, to_string(e.code()), e.what());
        }
      }
      json arr = json::array();
      for (const auto& r : records) arr.push_back(to_json(r));
      send_json(res, 200, {{"session_id", id}, {"records", arr}});
    });

    server.Post("/api/detect", [this](const httplib::Request& req, httplib::Response& res) {
      const json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) {
        return send_error(res, 400, "bad_request", "body must be a JSON object");
      }
      if (!body.contains("text") || !body["text"].is_string()) {
        return send_error(res, 400, "bad_request", "missing string field 'text'");
      }
      LogEvent event{std::nullopt, std::nullopt, EventRole::user, body["text"].get<std::string>()};
      json alerts = json::array();
      for (const auto& a : scan_event(state.detection, event, 1)) {
        json aj = to_json(a);
        aj.erase("line");
        alerts.push_back(aj);
      }
      send_json(res, 200, {{"alerts", alerts}});
    });

    if (state.console_dir && std::filesystem::is_directory(*state.console_dir)) {
      server.set_mount_point("/", state.console_dir->string());
    }

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      send_error(res, res.status, res.status == 404 ? "not_found" : "error",
                 res.status == 404 ? "no such resource" : "request failed");
      return httplib::Server::HandlerResponse::Handled;
    });
    server.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
          std::string what = "internal error";
          try {
            if (ep) std::rethrow_exception(ep);
          } catch (const std::exception& e) {
            what = e.what();
          } catch (...) {
          }
          send_error(res, 500, "internal", what);
        });
  }

  void handle_run(const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      return send_error(res, 400, "bad_request", "body must be a JSON object");
    }
    auto unresolvable = [&](const std::string& msg) { send_error(res, 422, "unresolvable", msg); };

    if (!body.contains("technique_id") || !body["technique_id"].is_string()) {
      return unresolvable("missing string field 'technique_id'");
    }
    if (!body.contains("adapter_id") || !body["adapter_id"].is_string()) {
      return unresolvable("missing string field 'adapter_id'");
    }
    std::optional<TechniqueId> tid;
    try {
      tid = parse_technique_id(body["technique_id"].get<std::string>());
    } catch (const Error& e) {
      return unresolvable(e.what());
    }
    std::size_t case_index = 0;
    if (body.contains("case_index")) {
      if (!body["case_index"].is_number_unsigned()) {
        return unresolvable("case_index must be a non-negative integer");
      }
      case_index = body["case_index"].get<std::size_t>();
    }
    const TestRule* rule = nullptr;
    for (const auto& r : state.rules) {
      if (r.id == *tid) {
        rule = &r;
        break;
      }
    }
    if (!rule) return unresolvable("no rule for technique " + tid->str());
    if (case_index >= rule->tests.size()) {
      return unresolvable("case_index " + std::to_string(case_index) + " out of range for " +
                          tid->str());
    }
    const std::string adapter_id = body["adapter_id"].get<std::string>();
    const AdapterConfig* adapter = find_adapter(state.adapters, adapter_id);
    if (!adapter) return unresolvable("unknown adapter '" + adapter_id + "'");

    std::string session_id = make_session_id();
    if (body.contains("session_id") && !body["session_id"].is_null()) {
      if (!body["session_id"].is_string() || !valid_session_id(body["session_id"].get<std::string>())) {
        return unresolvable("invalid session_id");
      }
      session_id = body["session_id"].get<std::string>();
    }

    try {
      Session& session = session_for(session_id, adapter->id);
      const RunRecord record = run_case(*adapter, *rule, case_index, session);
      if (record.error) {
        return send_json(res, 502,
                         {{"code", "adapter_error"}, {"message", *record.error}, {"record", to_json(record)}});
      }
      send_json(res, 200, to_json(record));
    } catch (const Error& e) {
      send_error(res, 500, to_string(e.code()), e.what());
    }
  }
};

Service::Service(ServiceState state) : impl_(std::make_unique<Impl>(std::move(state))) {}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound <= 0) throw Error(Errc::bind, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(Errc::bind, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace injectlab
