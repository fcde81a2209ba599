#include "icdpipe/record.hpp"

#include <cmath>

#include "icdpipe/errors.hpp"

namespace icdpipe {

int section_priority(SectionKind kind) {
  switch (kind) {
    case SectionKind::DischargeDiagnosis:
      return 1;
    case SectionKind::OperationNote:
      return 2;
    case SectionKind::MedicalHistory:
      return 3;
    case SectionKind::PathologyReport:
      return 4;
    case SectionKind::TreatmentCourse:
      return 5;
  }
  return 0;
}

std::string_view section_display_name(SectionKind kind) {
  switch (kind) {
    case SectionKind::DischargeDiagnosis:
      return "Discharge Diagnosis";
    case SectionKind::OperationNote:
      return "Operation Note";
    case SectionKind::MedicalHistory:
      return "Medical History";
    case SectionKind::PathologyReport:
      return "Pathology Report";
    case SectionKind::TreatmentCourse:
      return "Treatment Course";
  }
  return "";
}

std::string_view section_json_key(SectionKind kind) {
  switch (kind) {
    case SectionKind::DischargeDiagnosis:
      return "discharge_diagnosis";
    case SectionKind::OperationNote:
      return "operation_note";
    case SectionKind::MedicalHistory:
      return "medical_history";
    case SectionKind::PathologyReport:
      return "pathology_report";
    case SectionKind::TreatmentCourse:
      return "treatment_course";
  }
  return "";
}

std::string_view section_alias(SectionKind kind) {
  switch (kind) {
    case SectionKind::DischargeDiagnosis:
      return "dd";
    case SectionKind::OperationNote:
      return "op";
    case SectionKind::MedicalHistory:
      return "mh";
    case SectionKind::PathologyReport:
      return "pr";
    case SectionKind::TreatmentCourse:
      return "tc";
  }
  return "";
}

std::optional<SectionKind> section_from_alias(std::string_view alias) {
  for (SectionKind kind : kAllSections) {
    if (section_alias(kind) == alias) return kind;
  }
  return std::nullopt;
}

std::optional<SectionKind> section_from_json_key(std::string_view key) {
  for (SectionKind kind : kAllSections) {
    if (section_json_key(kind) == key) return kind;
  }
  return std::nullopt;
}

std::set<IcdCode> CodedRecord::code_set() const {
  std::set<IcdCode> codes;
  codes.insert(main_code);
  codes.insert(other_codes.begin(), other_codes.end());
  return codes;
}

std::string CodedRecord::joined_text() const {
  std::string out;
  for (SectionKind kind : kAllSections) {
    auto it = sections.find(kind);
    if (it == sections.end() || it->second.empty()) continue;
    if (!out.empty()) out.push_back('\n');
    out += it->second;
  }
  return out;
}

void SplitRatios::validate() const {
  for (double f : {train, dev, test}) {
    if (!(f > 0.0 && f < 1.0)) {
      throw ValidationError("split ratios must each lie in (0,1)");
    }
  }
  if (std::abs(train + dev + test - 1.0) > 1e-9) {
    throw ValidationError("split ratios must sum to 1");
  }
}

}  // namespace icdpipe
