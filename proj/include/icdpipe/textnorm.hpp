#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace icdpipe {

/// Character-level normalization: CR/CRLF to LF, full-width punctuation to
/// half-width per a fixed table, <p>/</p> markup dropped, space/tab runs
/// collapsed, runs of three or more line breaks collapsed to two, ends
/// trimmed. Total and idempotent.
std::string normalize_text(std::string_view raw);

/// A compiled, reusable ordered rule set. Construction throws
/// InvalidPatternError with the offending rule index if a pattern does not
/// compile.
class StripRules {
 public:
  explicit StripRules(const std::vector<std::string>& patterns);

  /// Remove every matched span, applying the rules in order and repeating
  /// until the text stops changing.
  std::string apply(std::string_view text) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

/// One-shot convenience over StripRules.
std::string strip_nonclinical(std::string_view text,
                              const std::vector<std::string>& rules);

/// The shipped non-clinical stripping rules: printed/page stamps, bracketed
/// timestamps, signature lines. Configurable at the CLI.
const std::vector<std::string>& default_strip_rules();

}  // namespace icdpipe
