#include "injectlab/error.hpp"

namespace injectlab {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::io: return "io_error";
    case Errc::parse: return "parse_error";
    case Errc::schema: return "schema_error";
    case Errc::malformed_id: return "malformed_id";
    case Errc::unknown_tactic: return "unknown_tactic";
    case Errc::duplicate_technique: return "duplicate_technique";
    case Errc::not_found: return "not_found";
    case Errc::empty_tests: return "empty_tests";
    case Errc::duplicate_adapter_id: return "duplicate_adapter_id";
    case Errc::index_out_of_range: return "index_out_of_range";
    case Errc::store: return "store_error";
    case Errc::config: return "config_error";
    case Errc::no_matchers: return "no_matchers";
    case Errc::timeout: return "timeout";
    case Errc::transport: return "transport_error";
    case Errc::auth: return "auth_error";
    case Errc::protocol: return "protocol_error";
    case Errc::missing_credential: return "missing_credential";
    case Errc::bind: return "bind_error";
  }
  return "unknown";
}

}  // namespace injectlab
