#include "icdpipe/code.hpp"

#include <cctype>

#include "icdpipe/errors.hpp"

namespace icdpipe {
namespace {

std::string canonicalize(std::string_view raw) {
  std::size_t b = 0, e = raw.size();
  while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
  std::string out;
  out.reserve(e - b);
  for (std::size_t i = b; i < e; ++i) {
    out.push_back(static_cast<char>(
        std::toupper(static_cast<unsigned char>(raw[i]))));
  }
  return out;
}

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum_upper(char c) { return is_upper(c) || is_digit(c); }

// ^[A-Z][0-9][0-9A-Z](\.[0-9A-Z]{1,4})?$
bool matches_pattern(const std::string& v) {
  if (v.size() < 3) return false;
  if (!is_upper(v[0]) || !is_digit(v[1]) || !is_alnum_upper(v[2])) return false;
  if (v.size() == 3) return true;
  if (v[3] != '.') return false;
  std::size_t tail = v.size() - 4;
  if (tail < 1 || tail > 4) return false;
  for (std::size_t i = 4; i < v.size(); ++i) {
    if (!is_alnum_upper(v[i])) return false;
  }
  return true;
}

}  // namespace

std::optional<IcdCode> IcdCode::parse(std::string_view raw) {
  std::string canon = canonicalize(raw);
  if (!matches_pattern(canon)) return std::nullopt;
  return IcdCode(std::move(canon));
}

std::string to_string(CodeRejection r) {
  switch (r) {
    case CodeRejection::Empty:
      return "empty";
    case CodeRejection::Malformed:
      return "malformed";
    case CodeRejection::NotInTable:
      return "not_in_table";
    case CodeRejection::None:
      break;
  }
  return "none";
}

CodeTable CodeTable::from_codes(const std::set<std::string>& codes) {
  CodeTable table;
  for (const auto& raw : codes) {
    auto parsed = IcdCode::parse(raw);
    if (!parsed) {
      throw ValidationError("code table entry is not a valid code: '" + raw +
                            "'");
    }
    table.codes_.insert(parsed->value());
  }
  return table;
}

CodeValidation validate_code(std::string_view raw, const CodeTable* table) {
  std::string canon = canonicalize(raw);
  if (canon.empty()) return {std::nullopt, CodeRejection::Empty};
  auto parsed = IcdCode::parse(canon);
  if (!parsed) return {std::nullopt, CodeRejection::Malformed};
  if (table != nullptr && !table->contains(parsed->value())) {
    return {std::nullopt, CodeRejection::NotInTable};
  }
  return {parsed, CodeRejection::None};
}

}  // namespace icdpipe
