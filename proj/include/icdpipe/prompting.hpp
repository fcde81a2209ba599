#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "icdpipe/code.hpp"
#include "icdpipe/record.hpp"

namespace icdpipe::prompting {

/// Universal prompts render all five sections (missing ones as "Nil");
/// section-specific prompts render only their configured subset and omit
/// absent sections entirely, headers included.
struct PromptMode {
  enum class Kind { Universal, Specific };

  Kind kind = Kind::Universal;
  std::set<SectionKind> sections;  // Specific only; must contain DischgDiag

  static PromptMode universal();
  static PromptMode specific(std::set<SectionKind> sections);
};

std::size_t whitespace_token_count(std::string_view text);

/// Token budget with a pluggable counting function (whitespace tokens by
/// default; the cap is tokenizer-specific in practice).
struct TokenBudget {
  int max_tokens = 2048;
  std::function<std::size_t(std::string_view)> counter;  // null = whitespace

  std::size_t count(std::string_view text) const {
    return counter ? counter(text) : whitespace_token_count(text);
  }
  void validate() const;
};

const std::string& default_instruction();

/// Trim section bodies until the budget holds: lowest priority first,
/// tail tokens first, emptying each section before touching the next. The
/// discharge diagnosis is cut only when it alone no longer fits, with a
/// warning. `overhead_tokens` is the structural cost (instruction, headers,
/// Nil fills) already committed.
struct TruncateResult {
  std::map<SectionKind, std::string> sections;
  std::vector<std::string> warnings;
};

TruncateResult truncate_sections(
    const std::map<SectionKind, std::string>& sections,
    const TokenBudget& budget, std::size_t overhead_tokens = 0);

struct RenderedPrompt {
  std::string text;
  std::vector<std::string> warnings;
};

/// Instruction header plus "### <Section Name>" blocks in priority order,
/// truncated to the budget. Throws BudgetTooSmallError when even a single
/// token of discharge diagnosis cannot fit.
RenderedPrompt render_prompt(const CodedRecord& record, const PromptMode& mode,
                             const TokenBudget& budget,
                             const std::string& instruction = default_instruction());

/// "MAINCODE: <main>\nOTHERCODE: <c1>, <c2>, ..." — the empty list renders
/// an empty value after the colon-space.
std::string format_target(const IcdCode& main,
                          const std::vector<IcdCode>& others);

struct PredictionCodes {
  std::optional<IcdCode> main_code;
  std::vector<IcdCode> other_codes;  // duplicate-free, never contains main
  std::vector<std::string> parse_warnings;
};

/// Inverse of format_target, tolerant of model output noise: MAINCODE and
/// OTHERCODE lines are located case-insensitively, invalid tokens and
/// duplicates go to parse_warnings. Total function.
PredictionCodes parse_prediction(std::string_view raw);

}  // namespace icdpipe::prompting
