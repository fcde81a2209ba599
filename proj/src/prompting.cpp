#include "icdpipe/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include "icdpipe/errors.hpp"

namespace icdpipe::prompting {

PromptMode PromptMode::universal() { return PromptMode{Kind::Universal, {}}; }

PromptMode PromptMode::specific(std::set<SectionKind> sections) {
  if (!sections.count(SectionKind::DischargeDiagnosis)) {
    throw ValidationError(
        "a section-specific prompt must include the discharge diagnosis");
  }
  return PromptMode{Kind::Specific, std::move(sections)};
}

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (char c : text) {
    bool space = std::isspace(static_cast<unsigned char>(c));
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

void TokenBudget::validate() const {
  if (max_tokens < 64) {
    throw ValidationError("token budget must be at least 64");
  }
}

const std::string& default_instruction() {
  static const std::string instruction =
      "Assign ICD-10-CM diagnosis codes for the discharge summary below. "
      "Reply with 'MAINCODE: <code>' for the principal diagnosis, then "
      "'OTHERCODE: <code>, <code>, ...' for the remaining codes.";
  return instruction;
}

namespace {

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() &&
           std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    std::size_t j = i;
    while (j < text.size() &&
           !std::isspace(static_cast<unsigned char>(text[j]))) {
      ++j;
    }
    if (j > i) words.push_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

std::string join_words(const std::vector<std::string>& words,
                       std::size_t count) {
  std::string out;
  for (std::size_t i = 0; i < count && i < words.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += words[i];
  }
  return out;
}

}  // namespace

TruncateResult truncate_sections(
    const std::map<SectionKind, std::string>& sections,
    const TokenBudget& budget, std::size_t overhead_tokens) {
  budget.validate();
  TruncateResult result;

  // word lists per present section, trimmed from the tail
  std::map<SectionKind, std::vector<std::string>> words;
  std::map<SectionKind, std::size_t> kept;
  for (const auto& [kind, text] : sections) {
    words[kind] = split_words(text);
    kept[kind] = words[kind].size();
  }
  auto body = [&](SectionKind kind) {
    return join_words(words[kind], kept[kind]);
  };
  auto total = [&] {
    std::size_t sum = overhead_tokens;
    for (const auto& [kind, text] : sections) {
      (void)text;
      sum += budget.count(body(kind));
    }
    return sum;
  };

  const std::size_t limit = static_cast<std::size_t>(budget.max_tokens);
  std::size_t current = total();
  if (current <= limit) {
    result.sections = sections;
    return result;
  }

  // lowest priority first, emptied completely before the next one up
  std::vector<SectionKind> order(kAllSections.rbegin(), kAllSections.rend());
  for (SectionKind kind : order) {
    if (current <= limit) break;
    if (!words.count(kind)) continue;
    bool is_anchor = kind == SectionKind::DischargeDiagnosis;
    std::size_t floor = is_anchor ? 1 : 0;
    bool trimmed = false;
    while (current > limit && kept[kind] > floor) {
      std::size_t excess = current - limit;
      std::size_t drop = std::min(kept[kind] - floor,
                                  std::max<std::size_t>(excess, 1));
      kept[kind] -= drop;
      trimmed = true;
      current = total();
    }
    if (trimmed) {
      if (is_anchor) {
        result.warnings.push_back(
            "discharge diagnosis truncated to fit the token budget");
      } else {
        result.warnings.push_back(
            "section '" + std::string(section_display_name(kind)) +
            "' truncated to fit the token budget");
      }
    }
  }

  for (const auto& [kind, all_words] : words) {
    (void)all_words;
    result.sections[kind] = body(kind);
  }
  return result;
}

namespace {

std::string render_text(const std::string& instruction,
                        const std::vector<SectionKind>& included,
                        const std::map<SectionKind, std::string>& bodies) {
  std::string out = instruction;
  for (SectionKind kind : included) {
    out += "\n\n### ";
    out += section_display_name(kind);
    auto it = bodies.find(kind);
    const std::string& text = it == bodies.end() ? std::string() : it->second;
    if (!text.empty()) {
      out.push_back('\n');
      out += text;
    }
  }
  return out;
}

}  // namespace

RenderedPrompt render_prompt(const CodedRecord& record, const PromptMode& mode,
                             const TokenBudget& budget,
                             const std::string& instruction) {
  budget.validate();
  if (mode.kind == PromptMode::Kind::Specific &&
      !mode.sections.count(SectionKind::DischargeDiagnosis)) {
    throw ValidationError(
        "a section-specific prompt must include the discharge diagnosis");
  }

  std::vector<SectionKind> included;
  std::map<SectionKind, std::string> bodies;   // trimmable content
  std::map<SectionKind, std::string> fixed;    // Nil fills, never trimmed
  for (SectionKind kind : kAllSections) {
    bool in_mode = mode.kind == PromptMode::Kind::Universal ||
                   mode.sections.count(kind) > 0;
    if (!in_mode) continue;
    auto it = record.sections.find(kind);
    bool present = it != record.sections.end() && !it->second.empty();
    if (mode.kind == PromptMode::Kind::Universal) {
      included.push_back(kind);
      if (present) {
        bodies[kind] = it->second;
      } else {
        fixed[kind] = "Nil";
      }
    } else if (present) {
      included.push_back(kind);
      bodies[kind] = it->second;
    }
  }

  std::map<SectionKind, std::string> empty_bodies = fixed;
  std::size_t overhead =
      budget.count(render_text(instruction, included, empty_bodies));

  TruncateResult truncated = truncate_sections(bodies, budget, overhead);
  std::map<SectionKind, std::string> final_bodies = fixed;
  for (const auto& [kind, text] : truncated.sections) {
    final_bodies[kind] = text;
  }

  RenderedPrompt rendered;
  rendered.text = render_text(instruction, included, final_bodies);
  rendered.warnings = std::move(truncated.warnings);
  if (budget.count(rendered.text) > static_cast<std::size_t>(budget.max_tokens)) {
    throw BudgetTooSmallError(
        "token budget cannot fit the instruction, section headers and any "
        "discharge diagnosis content");
  }
  return rendered;
}

std::string format_target(const IcdCode& main,
                          const std::vector<IcdCode>& others) {
  std::string out = "MAINCODE: " + main.value() + "\nOTHERCODE: ";
  for (std::size_t i = 0; i < others.size(); ++i) {
    if (i > 0) out += ", ";
    out += others[i].value();
  }
  return out;
}

PredictionCodes parse_prediction(std::string_view raw) {
  PredictionCodes result;
  static const std::regex main_line(R"(^\s*MAINCODE\s*:\s*(.*?)\s*$)",
                                    std::regex::icase);
  static const std::regex other_line(R"(^\s*OTHERCODE\s*:\s*(.*?)\s*$)",
                                     std::regex::icase);

  std::optional<std::string> main_value;
  std::optional<std::string> other_value;
  std::size_t start = 0;
  while (start <= raw.size()) {
    std::size_t end = raw.find('\n', start);
    std::string line(raw.substr(
        start, end == std::string_view::npos ? raw.size() - start
                                             : end - start));
    std::smatch match;
    if (!main_value && std::regex_match(line, match, main_line)) {
      main_value = match[1].str();
    } else if (!other_value && std::regex_match(line, match, other_line)) {
      other_value = match[1].str();
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }

  if (!main_value) {
    result.parse_warnings.push_back("missing MAINCODE line");
  } else if (main_value->empty()) {
    result.parse_warnings.push_back("empty MAINCODE value");
  } else {
    auto validated = validate_code(*main_value);
    if (validated) {
      result.main_code = validated.code;
    } else {
      result.parse_warnings.push_back("invalid main code '" + *main_value +
                                      "'");
    }
  }

  if (other_value) {
    std::set<IcdCode> seen;
    if (result.main_code) seen.insert(*result.main_code);
    std::size_t pos = 0;
    while (pos <= other_value->size()) {
      std::size_t comma = other_value->find(',', pos);
      std::string token = other_value->substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos);
      pos = comma == std::string::npos ? other_value->size() + 1 : comma + 1;
      // trim
      std::size_t b = token.find_first_not_of(" \t");
      std::size_t e = token.find_last_not_of(" \t");
      if (b == std::string::npos) continue;  // empty slot, e.g. trailing comma
      token = token.substr(b, e - b + 1);
      auto validated = validate_code(token);
      if (!validated) {
        result.parse_warnings.push_back("invalid code '" + token + "'");
        continue;
      }
      if (!seen.insert(*validated.code).second) {
        result.parse_warnings.push_back("duplicate code '" +
                                        validated.code->value() + "'");
        continue;
      }
      result.other_codes.push_back(*validated.code);
    }
  }
  return result;
}

}  // namespace icdpipe::prompting
