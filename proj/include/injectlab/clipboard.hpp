#pragma once

#include <string_view>

namespace injectlab {

class Clipboard {
 public:
  virtual ~Clipboard() = default;
  /// False when no clipboard is reachable (headless session, no helper tool).
  virtual bool copy(std::string_view text) = 0;
};

// Pipes into pbcopy, wl-copy, xclip or xsel, whichever fits the session.
// INJECTLAB_CLIPBOARD=off disables it.
class SystemClipboard final : public Clipboard {
 public:
  bool copy(std::string_view text) override;
};

}  // namespace injectlab
