#pragma once

#include <compare>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace icdpipe {

/// A canonical ICD-10-CM diagnosis code. Always uppercase, whitespace-free,
/// and matching letter-digit-alnum with an optional dot and 1-4 alnum
/// characters ("I10", "E11.9", "S52.501A"). The chapter key is the leading
/// letter.
class IcdCode {
 public:
  /// Unset sentinel; real codes only ever come out of parse().
  IcdCode() = default;

  /// Canonicalize (trim, uppercase) and check the syntactic pattern.
  /// Returns nullopt for anything that does not parse.
  static std::optional<IcdCode> parse(std::string_view raw);

  const std::string& value() const { return value_; }
  char chapter_key() const { return value_.empty() ? '\0' : value_[0]; }

  auto operator<=>(const IcdCode& other) const {
    return value_ <=> other.value_;
  }
  bool operator==(const IcdCode& other) const = default;

 private:
  explicit IcdCode(std::string value) : value_(std::move(value)) {}
  std::string value_;
};

/// Why validate_code refused an input.
enum class CodeRejection { None, Empty, Malformed, NotInTable };

std::string to_string(CodeRejection r);

struct CodeValidation {
  std::optional<IcdCode> code;
  CodeRejection rejection = CodeRejection::None;

  explicit operator bool() const { return code.has_value(); }
};

/// An optional whitelist of canonical codes for strict validation.
/// Every entry must itself pass the syntactic pattern.
class CodeTable {
 public:
  static CodeTable from_codes(const std::set<std::string>& codes);

  bool contains(const std::string& canonical) const {
    return codes_.count(canonical) > 0;
  }
  std::size_t size() const { return codes_.size(); }

 private:
  std::set<std::string> codes_;
};

/// Trim + uppercase, then either check table membership (when a table is
/// given) or the syntactic pattern.
CodeValidation validate_code(std::string_view raw,
                             const CodeTable* table = nullptr);

}  // namespace icdpipe
