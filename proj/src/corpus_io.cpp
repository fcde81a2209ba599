#include "icdpipe/corpus_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "icdpipe/errors.hpp"

namespace icdpipe::corpus {

namespace {

using nlohmann::json;

RawRecord raw_from_json(const json& j, std::size_t line_no) {
  if (!j.is_object()) {
    throw IoError("line " + std::to_string(line_no) + ": not a JSON object");
  }
  RawRecord record;
  record.id = j.value("id", "");
  if (j.contains("sections") && j.at("sections").is_object()) {
    for (const auto& [key, value] : j.at("sections").items()) {
      auto kind = section_from_json_key(key);
      if (!kind) {
        throw IoError("line " + std::to_string(line_no) +
                      ": unknown section key '" + key + "'");
      }
      if (value.is_string()) record.sections[*kind] = value.get<std::string>();
      // null means the section is absent
    }
  }
  if (j.contains("main_code") && j.at("main_code").is_string()) {
    record.main_code = j.at("main_code").get<std::string>();
  }
  if (j.contains("other_codes") && j.at("other_codes").is_array()) {
    for (const auto& code : j.at("other_codes")) {
      if (code.is_string()) record.other_codes.push_back(code.get<std::string>());
    }
  }
  return record;
}

json record_to_json(const CodedRecord& record) {
  json sections = json::object();
  for (SectionKind kind : kAllSections) {
    auto it = record.sections.find(kind);
    if (it == record.sections.end()) {
      sections[std::string(section_json_key(kind))] = nullptr;
    } else {
      sections[std::string(section_json_key(kind))] = it->second;
    }
  }
  json codes = json::array();
  for (const auto& code : record.other_codes) codes.push_back(code.value());
  return json{{"id", record.id},
              {"sections", sections},
              {"main_code", record.main_code.value()},
              {"other_codes", codes}};
}

}  // namespace

std::vector<RawRecord> read_raw_jsonl(std::istream& in) {
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw IoError("line " + std::to_string(line_no) + ": invalid JSON");
    }
    records.push_back(raw_from_json(j, line_no));
  }
  return records;
}

std::vector<RawRecord> read_raw_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_raw_jsonl(in);
}

std::vector<CodedRecord> read_records_jsonl_file(const std::string& path) {
  auto raw = read_raw_jsonl_file(path);
  std::vector<CodedRecord> records;
  records.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& r = raw[i];
    auto main = IcdCode::parse(r.main_code);
    if (!main) {
      throw IoError(path + ": record '" + r.id + "' has invalid main code '" +
                    r.main_code + "'");
    }
    CodedRecord record;
    record.id = r.id;
    record.sections = r.sections;
    record.main_code = *main;
    std::set<IcdCode> seen{record.main_code};
    for (const auto& raw_code : r.other_codes) {
      auto code = IcdCode::parse(raw_code);
      if (!code) {
        throw IoError(path + ": record '" + r.id + "' has invalid code '" +
                      raw_code + "'");
      }
      if (!seen.insert(*code).second) {
        throw IoError(path + ": record '" + r.id + "' repeats code '" +
                      code->value() + "'");
      }
      record.other_codes.push_back(*code);
    }
    auto dd = record.sections.find(SectionKind::DischargeDiagnosis);
    if (dd == record.sections.end() || dd->second.empty()) {
      throw IoError(path + ": record '" + r.id +
                    "' lacks a discharge diagnosis; run clean first");
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::string record_to_json_line(const CodedRecord& record) {
  return record_to_json(record).dump();
}

void write_records_jsonl(std::ostream& out,
                         const std::vector<CodedRecord>& records) {
  for (const auto& record : records) {
    out << record_to_json_line(record) << '\n';
  }
}

void write_records_jsonl_file(const std::string& path,
                              const std::vector<CodedRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  write_records_jsonl(out, records);
}

void write_rejections_jsonl_file(const std::string& path,
                                 const std::vector<Rejection>& rejections) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& r : rejections) {
    out << json{{"id", r.id}, {"reason", r.reason}}.dump() << '\n';
  }
}

}  // namespace icdpipe::corpus
