#include "icdpipe/textnorm.hpp"

#include <map>
#include <regex>

#include "icdpipe/errors.hpp"

namespace icdpipe {
namespace {

// Full-width punctuation to half-width. Every key is a 3-byte UTF-8
// sequence; every value is ASCII, so a second pass is a no-op.
const std::map<std::string, char>& punctuation_table() {
  static const std::map<std::string, char> table = {
      {"　", ' '},  // ideographic space
      {"，", ','}, {"、", ','}, {"。", '.'}, {"．", '.'},
      {"：", ':'}, {"；", ';'}, {"！", '!'}, {"？", '?'},
      {"（", '('}, {"）", ')'}, {"［", '['}, {"］", ']'},
      {"｛", '{'}, {"｝", '}'}, {"／", '/'}, {"＼", '\\'},
      {"－", '-'}, {"＋", '+'}, {"＝", '='}, {"＜", '<'},
      {"＞", '>'}, {"～", '~'}, {"％", '%'}, {"＆", '&'},
      {"＊", '*'}, {"＃", '#'}, {"＠", '@'}, {"＄", '$'},
      {"＇", '\''}, {"＂", '"'},
      {"「", '"'}, {"」", '"'}, {"『", '\''}, {"』", '\''},
      {"‘", '\''}, {"’", '\''}, {"“", '"'}, {"”", '"'},
      {"–", '-'}, {"—", '-'},
  };
  return table;
}

std::string map_punctuation(std::string_view text) {
  const auto& table = punctuation_table();
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char lead = static_cast<unsigned char>(text[i]);
    if (lead >= 0xE0 && i + 3 <= text.size()) {
      auto it = table.find(std::string(text.substr(i, 3)));
      if (it != table.end()) {
        out.push_back(it->second);
        i += 3;
        continue;
      }
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

bool is_tag_at(std::string_view s, std::size_t i, std::string_view tag) {
  if (i + tag.size() > s.size()) return false;
  for (std::size_t k = 0; k < tag.size(); ++k) {
    char a = s[i + k];
    char b = tag[k];
    if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
    if (a != b) return false;
  }
  return true;
}

// <p> and </p> become a single space so adjacent paragraphs stay separated.
std::string drop_paragraph_tags(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_tag_at(text, i, "<p>")) {
      out.push_back(' ');
      i += 3;
    } else if (is_tag_at(text, i, "</p>")) {
      out.push_back(' ');
      i += 4;
    } else {
      out.push_back(text[i]);
      ++i;
    }
  }
  return out;
}

std::string collapse_whitespace(std::string_view text) {
  // space/tab runs first: one space, or nothing next to a line break or
  // at either end
  std::string no_spaces;
  no_spaces.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t') {
      std::size_t j = i;
      while (j < text.size() && (text[j] == ' ' || text[j] == '\t')) ++j;
      bool before_newline = j < text.size() && text[j] == '\n';
      bool after_newline = !no_spaces.empty() && no_spaces.back() == '\n';
      bool at_edge = no_spaces.empty() || j == text.size();
      if (!before_newline && !after_newline && !at_edge) {
        no_spaces.push_back(' ');
      }
      i = j;
    } else {
      no_spaces.push_back(c);
      ++i;
    }
  }
  // newline runs are contiguous now; cap them at two
  std::string out;
  out.reserve(no_spaces.size());
  i = 0;
  while (i < no_spaces.size()) {
    if (no_spaces[i] == '\n') {
      std::size_t j = i;
      while (j < no_spaces.size() && no_spaces[j] == '\n') ++j;
      out.append(std::min<std::size_t>(j - i, 2), '\n');
      i = j;
    } else {
      out.push_back(no_spaces[i]);
      ++i;
    }
  }
  std::size_t b = 0, e = out.size();
  while (b < e && out[b] == '\n') ++b;
  while (e > b && out[e - 1] == '\n') --e;
  return out.substr(b, e - b);
}

}  // namespace

std::string normalize_text(std::string_view raw) {
  std::string text;
  text.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {  // CRLF / CR -> LF
    if (raw[i] == '\r') {
      if (i + 1 >= raw.size() || raw[i + 1] != '\n') text.push_back('\n');
    } else {
      text.push_back(raw[i]);
    }
  }
  text = map_punctuation(text);
  text = drop_paragraph_tags(text);
  return collapse_whitespace(text);
}

struct StripRules::Impl {
  std::vector<std::regex> compiled;
};

StripRules::StripRules(const std::vector<std::string>& patterns) {
  auto impl = std::make_shared<Impl>();
  impl->compiled.reserve(patterns.size());
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    try {
      impl->compiled.emplace_back(patterns[i], std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw InvalidPatternError(i, "strip rule " + std::to_string(i) +
                                       " does not compile: " + e.what());
    }
  }
  impl_ = std::move(impl);
}

std::string StripRules::apply(std::string_view text) const {
  std::string current(text);
  // Deleting a span can splice a new match together, so repeat the pass
  // list until a whole pass leaves the text unchanged.
  while (true) {
    std::string next = current;
    for (const auto& re : impl_->compiled) {
      next = std::regex_replace(next, re, "");
    }
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

std::string strip_nonclinical(std::string_view text,
                              const std::vector<std::string>& rules) {
  return StripRules(rules).apply(text);
}

const std::vector<std::string>& default_strip_rules() {
  static const std::vector<std::string> rules = {
      R"(\s*\[PRINTED[^\]]*\])",
      R"(\s*\[PAGE[^\]]*\])",
      R"(\s*\[(19|20)\d\d[-/]\d{1,2}[-/]\d{1,2}[^\]]*\])",
      R"([ \t]*Electronically signed by[^\n]*)",
  };
  return rules;
}

}  // namespace icdpipe
