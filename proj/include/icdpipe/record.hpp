#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "icdpipe/code.hpp"

namespace icdpipe {

/// The five discharge-summary sections, declared in checking-priority order
/// (1 = highest). Enum order is priority order.
enum class SectionKind {
  DischargeDiagnosis,
  OperationNote,
  MedicalHistory,
  PathologyReport,
  TreatmentCourse,
};

inline constexpr std::array<SectionKind, 5> kAllSections = {
    SectionKind::DischargeDiagnosis, SectionKind::OperationNote,
    SectionKind::MedicalHistory, SectionKind::PathologyReport,
    SectionKind::TreatmentCourse,
};

/// Checking priority, 1 (highest) through 5.
int section_priority(SectionKind kind);

/// English display name, e.g. "Discharge Diagnosis".
std::string_view section_display_name(SectionKind kind);

/// JSON object key, e.g. "discharge_diagnosis".
std::string_view section_json_key(SectionKind kind);

/// Short CLI alias: dd, op, mh, pr, tc.
std::string_view section_alias(SectionKind kind);

std::optional<SectionKind> section_from_alias(std::string_view alias);
std::optional<SectionKind> section_from_json_key(std::string_view key);

/// One coded discharge summary. DischargeDiagnosis is always present and
/// non-empty; main_code never appears in other_codes; other_codes are
/// duplicate-free. clean_corpus is the only sanctioned producer.
struct CodedRecord {
  std::string id;
  std::map<SectionKind, std::string> sections;  // present keys only
  IcdCode main_code;
  std::vector<IcdCode> other_codes;

  bool has_section(SectionKind kind) const { return sections.count(kind) > 0; }

  /// All codes of the record: {main} ∪ others as a set.
  std::set<IcdCode> code_set() const;

  /// Present section texts joined in priority order. The span used for
  /// embeddings and perplexity.
  std::string joined_text() const;
};

struct SplitRatios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;

  /// Each fraction in (0,1), summing to 1 within 1e-9. Throws
  /// ValidationError otherwise.
  void validate() const;
};

}  // namespace icdpipe
