#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace injectlab {

enum class Errc {
  io,
  parse,
  schema,
  malformed_id,
  unknown_tactic,
  duplicate_technique,
  not_found,
  empty_tests,
  duplicate_adapter_id,
  index_out_of_range,
  store,
  config,
  no_matchers,
  timeout,
  transport,
  auth,
  protocol,
  missing_credential,
  bind,
};

std::string_view to_string(Errc code);

// Every failure raised by the library carries a code so callers can branch
// without parsing messages. `line` is 1-based when present.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(message), code_(code), line_(line) {}

  Errc code() const noexcept { return code_; }
  const std::optional<std::size_t>& line() const noexcept { return line_; }

 private:
  Errc code_;
  std::optional<std::size_t> line_;
};

}  // namespace injectlab
