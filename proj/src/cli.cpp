#include "injectlab/cli.hpp"

#include <CLI11.hpp>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <pthread.h>
#include <thread>

#include "injectlab/adapter.hpp"
#include "injectlab/detection.hpp"
#include "injectlab/error.hpp"
#include "injectlab/report.hpp"
#include "injectlab/rule.hpp"
#include "injectlab/runner.hpp"
#include "injectlab/service.hpp"
#include "injectlab/timeutil.hpp"

namespace injectlab::cli {

namespace fs = std::filesystem;

fs::path default_data_dir() {
  if (const char* dir = std::getenv("INJECTLAB_DATA_DIR"); dir && *dir) return dir;
  return INJECTLAB_DATA_DIR;
}

namespace {

void print_diagnostics(const std::vector<Diagnostic>& diags, std::ostream& os) {
  for (const auto& d : diags) os << d.format() << '\n';
}

// Same acceptance as Python's int() for the menu: surrounding whitespace and
// an optional sign around decimal digits.
std::optional<long long> parse_selection(std::string line) {
  const auto first = line.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string::npos) return std::nullopt;
  const auto last = line.find_last_not_of(" \t\r\n\f\v");
  line = line.substr(first, last - first + 1);
  std::size_t i = 0;
  bool negative = false;
  if (line[0] == '+' || line[0] == '-') {
    negative = line[0] == '-';
    i = 1;
  }
  if (i == line.size() || line.size() - i > 12) return std::nullopt;
  long long v = 0;
  for (; i < line.size(); ++i) {
    if (line[i] < '0' || line[i] > '9') return std::nullopt;
    v = v * 10 + (line[i] - '0');
  }
  return negative ? -v : v;
}

// Rules that load and validate cleanly against the catalog.
std::vector<TestRule> usable_rules(const CliConfig& config, const Matrix& matrix,
                                   std::ostream& err) {
  SuiteLoad suite = load_suite(config.suite_dir);
  print_diagnostics(suite.diagnostics, err);
  std::vector<TestRule> out;
  for (auto& rule : suite.rules) {
    const auto diags = validate_rule(rule, matrix);
    bool bad = false;
    for (const auto& d : diags) {
      if (d.severity == Severity::error) {
        err << d.format() << " (rule skipped)\n";
        bad = true;
      }
    }
    if (!bad) out.push_back(std::move(rule));
  }
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << content;
  if (!f) throw Error(Errc::io, "cannot write " + path.string());
}

void write_reports(const CliConfig& config, const SuiteSummary& summary, const Matrix& matrix,
                   std::ostream& out) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  const auto json_path = config.out_dir / "report.json";
  const auto md_path = config.out_dir / "report.md";
  write_file(json_path, to_json(summary).dump(2) + "\n");
  write_file(md_path, render_markdown(summary, matrix));
  out << "wrote " << json_path.string() << "\nwrote " << md_path.string() << '\n';
}

std::optional<std::pair<std::string, int>> parse_bind(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0) return std::nullopt;
  const std::string port = addr.substr(colon + 1);
  if (port.empty() || port.size() > 5 || port.find_first_not_of("0123456789") != std::string::npos) {
    return std::nullopt;
  }
  const int p = std::stoi(port);
  if (p > 65535) return std::nullopt;
  return std::make_pair(addr.substr(0, colon), p);
}

}  // namespace

int interactive_menu(const CliConfig& config, std::istream& in, std::ostream& out,
                     std::ostream& err, Clipboard& clipboard, std::size_t case_index) {
  SuiteLoad suite;
  try {
    suite = load_suite(config.suite_dir);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  for (const auto& d : suite.diagnostics) {
    if (d.severity == Severity::error) err << d.format() << '\n';
  }
  std::vector<const TestRule*> entries;
  for (const auto& r : suite.rules) {
    if (case_index < r.tests.size()) entries.push_back(&r);
  }

  out << "Available InjectLab Prompt Tests:\n\n";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    out << (i + 1) << ". " << entries[i]->id.str() << " - " << entries[i]->name << '\n';
  }
  out << "\nSelect a test by number: " << std::flush;

  std::string line;
  std::optional<long long> choice;
  if (std::getline(in, line)) choice = parse_selection(line);
  if (!choice || *choice < 1 || *choice > static_cast<long long>(entries.size())) {
    out << "Invalid selection.\n";
    return kExitError;
  }

  const TestRule& selected = *entries[static_cast<std::size_t>(*choice - 1)];
  const std::string& prompt = selected.tests[case_index].prompt;
  const std::string rule_line(60, '-');
  out << "\nPrompt for " << selected.id.str() << " - " << selected.name << "\n\n";
  out << rule_line << '\n' << prompt << '\n' << rule_line << '\n';
  if (clipboard.copy(prompt)) {
    out << "\nPrompt copied to clipboard!\n";
  } else {
    out << "\nClipboard unavailable; prompt printed above.\n";
  }
  return kExitOk;
}

int cmd_validate(const CliConfig& config, std::ostream& out, std::ostream& err) {
  std::vector<Diagnostic> diags;
  std::optional<Matrix> matrix;
  try {
    matrix = load_catalog(config.catalog_path);
  } catch (const Error& e) {
    diags.push_back({Severity::error, e.what(), config.catalog_path, e.line()});
  }

  std::size_t rule_count = 0;
  try {
    SuiteLoad suite = load_suite(config.suite_dir);
    diags.insert(diags.end(), suite.diagnostics.begin(), suite.diagnostics.end());
    rule_count = suite.rules.size();
    if (matrix) {
      for (const auto& rule : suite.rules) {
        auto v = validate_rule(rule, *matrix);
        diags.insert(diags.end(), v.begin(), v.end());
      }
      const CoverageMap cov = coverage(*matrix, suite.rules);
      for (const auto& w : cov.warnings) diags.push_back({Severity::warning, w, {}, std::nullopt});
    }
  } catch (const Error& e) {
    diags.push_back({Severity::error, e.what(), config.suite_dir, std::nullopt});
  }

  std::size_t detection_count = 0;
  try {
    auto det = load_detection_rules(config.detection_rules_path, matrix ? &*matrix : nullptr);
    diags.insert(diags.end(), det.diagnostics.begin(), det.diagnostics.end());
    detection_count = det.rules.size();
  } catch (const Error& e) {
    diags.push_back({Severity::error, e.what(), config.detection_rules_path, e.line()});
  }

  std::size_t errors = 0;
  std::size_t warnings = 0;
  for (const auto& d : diags) {
    (d.severity == Severity::error ? errors : warnings)++;
    out << d.format() << '\n';
  }
  out << "catalog: " << (matrix ? std::to_string(matrix->techniques.size()) + " techniques" : "invalid")
      << ", suite: " << rule_count << " rules, detection: " << detection_count << " rules; "
      << errors << " error(s), " << warnings << " warning(s)\n";
  (void)err;
  return errors > 0 ? kExitError : kExitOk;
}

int cmd_run(const CliConfig& config, const RunOptions& options, std::ostream& out,
            std::ostream& err) {
  try {
    const Matrix matrix = load_catalog(config.catalog_path);
    const auto adapters = list_adapters(config.adapters_path);
    const AdapterConfig* adapter = find_adapter(adapters, options.adapter_id);
    if (!adapter) throw Error(Errc::config, "unknown adapter '" + options.adapter_id + "'");
    if (options.parallelism < 1) throw Error(Errc::config, "--parallelism must be at least 1");

    std::vector<TestRule> rules = usable_rules(config, matrix, err);
    if (options.rule_filter) {
      std::erase_if(rules, [&](const TestRule& r) { return r.id != *options.rule_filter; });
      if (rules.empty()) err << "warning: no rules for " << options.rule_filter->str() << '\n';
    }

    Session session(config.store_dir, options.session_id.value_or(make_session_id()), adapter->id);
    const SuiteRun run = run_suite(*adapter, rules, session, options.parallelism);

    bool vulnerable = false;
    for (const auto& r : run.records) {
      out << "RUN " << r.technique_id.str() << '#' << r.case_index << " -> "
          << to_string(r.verdict.outcome) << '\n';
      if (r.error) err << r.technique_id.str() << '#' << r.case_index << ": " << *r.error << '\n';
      vulnerable = vulnerable || r.verdict.outcome == Outcome::VULNERABLE;
    }
    for (const auto& s : run.skips) {
      out << "SKIP " << s.technique_id.str() << '#' << s.case_index << " (" << s.reason << ")\n";
    }
    out << "session " << session.id() << " -> " << session.path().string() << '\n';

    const SuiteSummary summary = summarize(run.records, run.skips, session.id(), adapter->id,
                                           options.generated_at.value_or(rfc3339_now()));
    write_reports(config, summary, matrix, out);
    return vulnerable ? kExitFindings : kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

int cmd_detect(const CliConfig& config, const fs::path& log_path, std::ostream& out,
               std::ostream& err, std::istream* stdin_stream) {
  try {
    const DetectionLoad det = load_detection_rules(config.detection_rules_path);
    print_diagnostics(det.diagnostics, err);

    std::ifstream file;
    std::istream* in = stdin_stream ? stdin_stream : &std::cin;
    if (log_path != "-") {
      file.open(log_path, std::ios::binary);
      if (!file) throw Error(Errc::io, "cannot open " + log_path.string());
      in = &file;
    }
    const std::size_t alerts =
        scan_log(det.rules, *in,
                 ScanSink{[&](const Alert& a) { out << to_json(a).dump() << '\n'; },
                          [&](std::size_t line, const std::string& why) {
                            err << log_path.string() << ':' << line << ": corrupt event: " << why
                                << '\n';
                          }});
    out.flush();
    return alerts > 0 ? kExitFindings : kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

int cmd_report(const CliConfig& config, const std::string& session_id, std::ostream& out,
               std::ostream& err, std::optional<std::string> generated_at) {
  try {
    const Matrix matrix = load_catalog(config.catalog_path);
    const LoadedSession session = load_session(session_id, config.store_dir);
    for (const auto& c : session.corrupt) err << "warning: " << session_id << ": " << c << '\n';

    const SuiteSummary summary = summarize(session.records, {}, session.session_id,
                                           session.adapter_id, generated_at.value_or(rfc3339_now()));
    write_reports(config, summary, matrix, out);

    std::vector<TestRule> rules;
    try {
      rules = load_suite(config.suite_dir).rules;
    } catch (const Error& e) {
      err << "warning: " << e.what() << "; matrix coverage shown as zero\n";
    }
    const auto html_path = config.out_dir / "matrix.html";
    write_file(html_path, export_matrix_html(matrix, coverage(matrix, rules)));
    out << "wrote " << html_path.string() << '\n';
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

int cmd_serve(const CliConfig& config, const std::string& bind_address,
              const std::optional<fs::path>& console_dir, std::ostream& out, std::ostream& err) {
  const auto bind = parse_bind(bind_address);
  if (!bind) {
    err << "error: --bind expects ADDR:PORT\n";
    return kExitError;
  }
  ServiceState state;
  try {
    state.matrix = load_catalog(config.catalog_path);
    state.rules = usable_rules(config, state.matrix, err);
    auto det = load_detection_rules(config.detection_rules_path, &state.matrix);
    print_diagnostics(det.diagnostics, err);
    state.detection = std::move(det.rules);
    state.adapters = list_adapters(config.adapters_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  state.store_dir = config.store_dir;
  state.console_dir = console_dir;

  // Signals go to a dedicated waiter thread so shutdown runs outside a handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(std::move(state));
  int port = 0;
  try {
    port = service.bind(bind->first, bind->second);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  out << "listening on http://" << bind->first << ':' << port << std::endl;

  std::jthread waiter([&service, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  service.run();
  // run() also returns if the listener fails; release the waiter either way.
  pthread_kill(waiter.native_handle(), SIGTERM);
  return kExitOk;
}

int main(int argc, char** argv) {
  CLI::App app{"InjectLab: prompt-injection adversary emulation"};
  app.name("injectlab");
  app.fallthrough();
  app.require_subcommand(0, 1);

  CliConfig config;
  std::string suite = config.suite_dir.string();
  std::string catalog = config.catalog_path.string();
  std::string adapters = config.adapters_path.string();
  std::string rules = config.detection_rules_path.string();
  std::string store = config.store_dir.string();
  std::string out_dir = config.out_dir.string();
  app.add_option("--suite", suite, "Test rule directory")->capture_default_str();
  app.add_option("--catalog", catalog, "Technique catalog")->capture_default_str();
  app.add_option("--adapters", adapters, "Adapter configuration")->capture_default_str();
  app.add_option("--rules", rules, "Detection rules")->capture_default_str();
  app.add_option("--store", store, "Session store directory")->capture_default_str();
  app.add_option("--out", out_dir, "Report output directory")->capture_default_str();

  auto* menu = app.add_subcommand("menu", "Pick a test prompt interactively (default)");
  std::size_t case_index = 0;
  menu->add_option("--case", case_index, "Test case index within each rule")->capture_default_str();

  auto* validate = app.add_subcommand("validate", "Check catalog, suite and detection rules");

  auto* run = app.add_subcommand("run", "Run the suite against an adapter");
  RunOptions run_opts;
  std::string technique;
  std::string session_id;
  run->add_option("--adapter", run_opts.adapter_id, "Adapter id")->required();
  run->add_option("--technique", technique, "Only run rules for this technique");
  run->add_option("--session", session_id, "Session id (default: timestamp)");
  run->add_option("--parallelism", run_opts.parallelism, "Concurrent requests")
      ->capture_default_str();

  auto* detect = app.add_subcommand("detect", "Scan a prompt log with detection rules");
  std::string log_path;
  detect->add_option("log", log_path, "Log file, or - for stdin")->required();

  auto* report = app.add_subcommand("report", "Write reports for a stored session");
  std::string report_session;
  report->add_option("--session", report_session, "Session id")->required();

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API and console");
  std::string bind = "127.0.0.1:8642";
  std::string console;
  serve->add_option("--bind", bind, "ADDR:PORT")->capture_default_str();
  serve->add_option("--console", console, "Console asset directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  config.suite_dir = suite;
  config.catalog_path = catalog;
  config.adapters_path = adapters;
  config.detection_rules_path = rules;
  config.store_dir = store;
  config.out_dir = out_dir;

  if (*validate) return cmd_validate(config, std::cout, std::cerr);
  if (*run) {
    if (!technique.empty()) {
      try {
        run_opts.rule_filter = parse_technique_id(technique);
      } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
      }
    }
    if (!session_id.empty()) run_opts.session_id = session_id;
    return cmd_run(config, run_opts, std::cout, std::cerr);
  }
  if (*detect) return cmd_detect(config, log_path, std::cout, std::cerr);
  if (*report) return cmd_report(config, report_session, std::cout, std::cerr);
  if (*serve) {
    std::optional<fs::path> console_dir;
    if (!console.empty()) console_dir = console;
    return cmd_serve(config, bind, console_dir, std::cout, std::cerr);
  }
  SystemClipboard clipboard;
  (void)menu;
  return interactive_menu(config, std::cin, std::cout, std::cerr, clipboard, case_index);
}

}  // namespace injectlab::cli
