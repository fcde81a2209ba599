#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "icdpipe/corpus.hpp"
#include "icdpipe/record.hpp"

namespace icdpipe::corpus {

/// Parse one-record-per-line JSON. Lines that are not valid JSON objects
/// raise IoError with the line number; unknown section keys raise too.
std::vector<RawRecord> read_raw_jsonl(std::istream& in);
std::vector<RawRecord> read_raw_jsonl_file(const std::string& path);

/// Cleaned records round-trip through the same schema.
std::vector<CodedRecord> read_records_jsonl_file(const std::string& path);
void write_records_jsonl(std::ostream& out,
                         const std::vector<CodedRecord>& records);
void write_records_jsonl_file(const std::string& path,
                              const std::vector<CodedRecord>& records);

std::string record_to_json_line(const CodedRecord& record);

void write_rejections_jsonl_file(const std::string& path,
                                 const std::vector<Rejection>& rejections);

}  // namespace icdpipe::corpus
