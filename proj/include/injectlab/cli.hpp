#pragma once

// The `injectlab` command line: the interactive prompt menu plus the
// validate / run / detect / report / serve subcommands. Each command takes
// explicit streams so it can be driven in-process.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "injectlab/clipboard.hpp"
#include "injectlab/matrix.hpp"

namespace injectlab::cli {

// Directory holding the shipped catalog, detection rules and adapters.
std::filesystem::path default_data_dir();

struct CliConfig {
  std::filesystem::path suite_dir = "./injectlab-suite";
  std::filesystem::path catalog_path = default_data_dir() / "catalog.yaml";
  std::filesystem::path adapters_path = default_data_dir() / "adapters.yaml";
  std::filesystem::path detection_rules_path = default_data_dir() / "detection-rules.yaml";
  std::filesystem::path store_dir = "./sessions";
  std::filesystem::path out_dir = ".";
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitFindings = 2;

int interactive_menu(const CliConfig& config, std::istream& in, std::ostream& out,
                     std::ostream& err, Clipboard& clipboard, std::size_t case_index = 0);

int cmd_validate(const CliConfig& config, std::ostream& out, std::ostream& err);

struct RunOptions {
  std::string adapter_id;
  std::optional<TechniqueId> rule_filter;
  std::optional<std::string> session_id;
  int parallelism = 1;
  // Report timestamp; now when unset.
  std::optional<std::string> generated_at;
};

int cmd_run(const CliConfig& config, const RunOptions& options, std::ostream& out,
            std::ostream& err);

int cmd_detect(const CliConfig& config, const std::filesystem::path& log_path, std::ostream& out,
               std::ostream& err, std::istream* stdin_stream = nullptr);

int cmd_report(const CliConfig& config, const std::string& session_id, std::ostream& out,
               std::ostream& err, std::optional<std::string> generated_at = std::nullopt);

int cmd_serve(const CliConfig& config, const std::string& bind_address,
              const std::optional<std::filesystem::path>& console_dir, std::ostream& out,
              std::ostream& err);

int main(int argc, char** argv);

}  // namespace injectlab::cli
