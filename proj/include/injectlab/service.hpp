#pragma once

// HTTP API for the operator console. Registry state is loaded once at
// startup and read-only afterwards; POST /api/runs is the only mutation.
//
//   GET  /api/matrix              tactics, techniques, rule coverage
//   GET  /api/adapters            configured adapter ids (no credentials)
//   GET  /api/rules/{technique}   rule documents for one technique
//   POST /api/runs                run one case, returns the stored record
//   GET  /api/sessions/{id}       ordered run records
//   POST /api/detect              scan one text with the detection rules

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "injectlab/adapter.hpp"
#include "injectlab/detection.hpp"
#include "injectlab/matrix.hpp"
#include "injectlab/rule.hpp"

namespace injectlab {

struct ServiceState {
  Matrix matrix;
  std::vector<TestRule> rules;
  DetectionRuleSet detection;
  std::vector<AdapterConfig> adapters;
  std::filesystem::path store_dir;
  std::optional<std::filesystem::path> console_dir;
};

class Service {
 public:
  explicit Service(ServiceState state);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Throws Error{bind}. Port 0 picks a free port; returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace injectlab
