#pragma once

#include <chrono>
#include <string>

namespace injectlab {

// RFC 3339 UTC with millisecond precision, e.g. 2025-04-01T12:00:00.000Z
std::string format_rfc3339(std::chrono::system_clock::time_point t);
std::string rfc3339_now();

}  // namespace injectlab
