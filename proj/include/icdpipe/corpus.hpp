#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "icdpipe/code.hpp"
#include "icdpipe/record.hpp"

namespace icdpipe::corpus {

/// A record as it arrives from the JSONL input, before any validation.
struct RawRecord {
  std::string id;
  std::map<SectionKind, std::string> sections;
  std::string main_code;                 // empty when missing
  std::vector<std::string> other_codes;  // raw strings
};

struct Rejection {
  std::string id;
  std::string reason;
};

struct CleanOptions {
  const CodeTable* code_table = nullptr;   // strict validation when set
  std::vector<std::string> strip_rules;    // defaults to default_strip_rules()
  bool use_default_strip_rules = true;
  std::size_t parallelism = 1;
};

struct CleanResult {
  std::vector<CodedRecord> records;   // input order preserved
  std::vector<Rejection> rejections;  // one entry per dropped record
  std::vector<Rejection> warnings;    // retained records with oddities
};

/// Validate codes, normalize and strip every section, and drop records that
/// cannot be repaired: no codes at all, an invalid code, or an empty
/// discharge diagnosis. Duplicate codes within a record are dropped
/// (keep-first) with a warning.
CleanResult clean_corpus(const std::vector<RawRecord>& raw,
                         const CleanOptions& options = {});

/// Code counts sorted by count descending, then code ascending.
struct CodeFrequencyTable {
  std::vector<std::pair<IcdCode, std::uint64_t>> entries;

  /// The first k codes (fewer if the table is shorter).
  std::vector<IcdCode> top_k(std::size_t k) const;
  std::uint64_t total() const;
};

/// Each record contributes each of its codes once (main and others alike).
CodeFrequencyTable code_frequency(const std::vector<CodedRecord>& records);

/// Code occurrences grouped by leading letter.
std::map<char, std::uint64_t> chapter_histogram(
    const std::vector<CodedRecord>& records);

struct SplitResult {
  std::vector<CodedRecord> train;
  std::vector<CodedRecord> dev;
  std::vector<CodedRecord> test;
};

/// Iterative stratification: repeatedly take the label with the fewest
/// unassigned examples and deal those examples to the split with the
/// greatest remaining demand for that label; ties go to the split with the
/// greatest overall remaining capacity, then to a seeded draw. Splits are
/// hard-capped at ceil(ratio * n) examples, which keeps every split size
/// within (number of splits) of its target. The result is an exact
/// partition, deterministic for a fixed seed.
SplitResult stratified_split(const std::vector<CodedRecord>& records,
                             const SplitRatios& ratios,
                             std::uint64_t seed = 0);

}  // namespace icdpipe::corpus
