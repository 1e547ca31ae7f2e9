#include "injectlab/clipboard.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

namespace injectlab {

namespace {

bool env_set(const char* name) {
  const char* v = std::getenv(name);
  return v && *v;
}

bool on_path(const std::string& tool) {
  const char* path = std::getenv("PATH");
  if (!path) return false;
  std::string_view rest(path);
  while (!rest.empty()) {
    const auto sep = rest.find(':');
    const std::string dir(rest.substr(0, sep));
    std::error_code ec;
    if (!dir.empty() && std::filesystem::exists(std::filesystem::path(dir) / tool, ec)) return true;
    if (sep == std::string_view::npos) break;
    rest.remove_prefix(sep + 1);
  }
  return false;
}

std::vector<std::string> candidates() {
  std::vector<std::string> out;
#if defined(__APPLE__)
  out.push_back("pbcopy");
#else
  if (env_set("WAYLAND_DISPLAY") && on_path("wl-copy")) out.push_back("wl-copy");
  if (env_set("DISPLAY")) {
    if (on_path("xclip")) out.push_back("xclip -selection clipboard");
    if (on_path("xsel")) out.push_back("xsel --clipboard --input");
  }
#endif
  return out;
}

}  // namespace

bool SystemClipboard::copy(std::string_view text) {
  if (const char* mode = std::getenv("INJECTLAB_CLIPBOARD"); mode && std::string_view(mode) == "off") {
    return false;
  }
  for (const auto& cmd : candidates()) {
    FILE* pipe = ::popen((cmd + " 2>/dev/null").c_str(), "w");
    if (!pipe) continue;
    const bool wrote = std::fwrite(text.data(), 1, text.size(), pipe) == text.size();
    if (::pclose(pipe) == 0 && wrote) return true;
  }
  return false;
}

}  // namespace injectlab
