#include "icdpipe/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "icdpipe/errors.hpp"
#include "icdpipe/hashing.hpp"
#include "icdpipe/parallel.hpp"
#include "icdpipe/textnorm.hpp"

namespace icdpipe::corpus {

namespace {

struct RecordOutcome {
  bool kept = false;
  CodedRecord record;
  std::vector<Rejection> rejections;
  std::vector<Rejection> warnings;
};

RecordOutcome clean_one(const RawRecord& raw, const StripRules& rules,
                        const CodeTable* table) {
  RecordOutcome out;
  if (raw.main_code.empty() && raw.other_codes.empty()) {
    out.rejections.push_back({raw.id, "no_codes"});
    return out;
  }
  auto main = validate_code(raw.main_code, table);
  if (!main) {
    out.rejections.push_back(
        {raw.id, raw.main_code.empty() ? "no_codes"
                                       : to_string(main.rejection)});
    return out;
  }
  CodedRecord record;
  record.id = raw.id;
  record.main_code = *main.code;
  std::set<IcdCode> seen{*main.code};
  for (const auto& raw_code : raw.other_codes) {
    auto other = validate_code(raw_code, table);
    if (!other) {
      out.rejections.push_back({raw.id, to_string(other.rejection)});
      return out;
    }
    if (!seen.insert(*other.code).second) {
      out.warnings.push_back(
          {raw.id, "duplicate_code:" + other.code->value()});
      continue;
    }
    record.other_codes.push_back(*other.code);
  }
  for (const auto& [kind, text] : raw.sections) {
    std::string cleaned = rules.apply(normalize_text(text));
    if (!cleaned.empty()) record.sections[kind] = std::move(cleaned);
  }
  auto dd = record.sections.find(SectionKind::DischargeDiagnosis);
  if (dd == record.sections.end()) {
    out.rejections.push_back({raw.id, "empty_discharge_diagnosis"});
    return out;
  }
  out.kept = true;
  out.record = std::move(record);
  return out;
}

}  // namespace

CleanResult clean_corpus(const std::vector<RawRecord>& raw,
                         const CleanOptions& options) {
  // compile the rule set once; a bad pattern fails fast here
  const StripRules rules(options.use_default_strip_rules &&
                                 options.strip_rules.empty()
                             ? default_strip_rules()
                             : options.strip_rules);

  std::vector<RecordOutcome> outcomes(raw.size());
  parallel_for(raw.size(), std::max<std::size_t>(options.parallelism, 1),
               [&](std::size_t i) {
                 outcomes[i] = clean_one(raw[i], rules, options.code_table);
               });

  CleanResult result;
  std::unordered_set<std::string> ids;
  for (auto& outcome : outcomes) {
    for (auto& r : outcome.rejections) result.rejections.push_back(std::move(r));
    for (auto& w : outcome.warnings) result.warnings.push_back(std::move(w));
    if (!outcome.kept) continue;
    if (!ids.insert(outcome.record.id).second) {
      result.warnings.push_back({outcome.record.id, "duplicate_id"});
    }
    result.records.push_back(std::move(outcome.record));
  }
  return result;
}

std::vector<IcdCode> CodeFrequencyTable::top_k(std::size_t k) const {
  std::vector<IcdCode> out;
  out.reserve(std::min(k, entries.size()));
  for (std::size_t i = 0; i < entries.size() && i < k; ++i) {
    out.push_back(entries[i].first);
  }
  return out;
}

std::uint64_t CodeFrequencyTable::total() const {
  std::uint64_t sum = 0;
  for (const auto& [code, count] : entries) sum += count;
  return sum;
}

CodeFrequencyTable code_frequency(const std::vector<CodedRecord>& records) {
  std::map<IcdCode, std::uint64_t> counts;
  for (const auto& record : records) {
    counts[record.main_code] += 1;
    for (const auto& code : record.other_codes) counts[code] += 1;
  }
  CodeFrequencyTable table;
  table.entries.assign(counts.begin(), counts.end());
  std::sort(table.entries.begin(), table.entries.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  return table;
}

std::map<char, std::uint64_t> chapter_histogram(
    const std::vector<CodedRecord>& records) {
  std::map<char, std::uint64_t> hist;
  for (const auto& record : records) {
    hist[record.main_code.chapter_key()] += 1;
    for (const auto& code : record.other_codes) {
      hist[code.chapter_key()] += 1;
    }
  }
  return hist;
}

SplitResult stratified_split(const std::vector<CodedRecord>& records,
                             const SplitRatios& ratios, std::uint64_t seed) {
  if (records.empty()) throw EmptyInputError("stratified_split: empty corpus");
  ratios.validate();

  const std::size_t n = records.size();
  constexpr int kSplits = 3;
  const double ratio[kSplits] = {ratios.train, ratios.dev, ratios.test};

  // label -> indices of records carrying it (input order)
  std::map<IcdCode, std::vector<std::size_t>> label_examples;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& code : records[i].code_set()) {
      label_examples[code].push_back(i);
    }
  }

  // remaining desired counts, real-valued
  double capacity[kSplits];
  for (int s = 0; s < kSplits; ++s) capacity[s] = ratio[s] * double(n);
  // hard size caps: ceil(ratio * n) per split keeps every size within
  // (number of splits) of its target, which the demand rule alone does not
  std::size_t cap[kSplits];
  std::size_t assigned_count[kSplits] = {0, 0, 0};
  for (int s = 0; s < kSplits; ++s) {
    cap[s] = static_cast<std::size_t>(std::ceil(ratio[s] * double(n) - 1e-9));
  }
  std::map<IcdCode, std::array<double, kSplits>> label_demand;
  std::map<IcdCode, std::size_t> label_remaining;
  for (const auto& [code, examples] : label_examples) {
    for (int s = 0; s < kSplits; ++s) {
      label_demand[code][s] = ratio[s] * double(examples.size());
    }
    label_remaining[code] = examples.size();
  }

  std::vector<int> assignment(n, -1);
  DetRng rng(seed);
  std::size_t unassigned = n;
  while (unassigned > 0) {
    // rarest label still carrying unassigned examples; ties by code order
    const IcdCode* pick = nullptr;
    std::size_t best = 0;
    for (const auto& [code, remaining] : label_remaining) {
      if (remaining == 0) continue;
      if (pick == nullptr || remaining < best) {
        pick = &code;
        best = remaining;
      }
    }
    auto& demand = label_demand[*pick];
    for (std::size_t idx : label_examples[*pick]) {
      if (assignment[idx] != -1) continue;
      // among splits still below their size cap: greatest remaining demand
      // for this label, then greatest overall capacity, then a seeded draw
      std::vector<int> eligible;
      for (int s = 0; s < kSplits; ++s) {
        if (assigned_count[s] < cap[s]) eligible.push_back(s);
      }
      std::vector<int> tied;
      double best_demand = demand[eligible[0]];
      for (int s : eligible) best_demand = std::max(best_demand, demand[s]);
      for (int s : eligible) {
        if (demand[s] >= best_demand - 1e-12) tied.push_back(s);
      }
      if (tied.size() > 1) {
        double best_cap = capacity[tied[0]];
        for (int s : tied) best_cap = std::max(best_cap, capacity[s]);
        std::vector<int> tied2;
        for (int s : tied) {
          if (capacity[s] >= best_cap - 1e-12) tied2.push_back(s);
        }
        tied = std::move(tied2);
      }
      int chosen = tied.size() == 1
                       ? tied[0]
                       : tied[rng.next_below(tied.size())];
      assignment[idx] = chosen;
      --unassigned;
      capacity[chosen] -= 1.0;
      assigned_count[chosen] += 1;
      for (const auto& code : records[idx].code_set()) {
        label_demand[code][chosen] -= 1.0;
        label_remaining[code] -= 1;
      }
    }
  }

  SplitResult result;
  for (std::size_t i = 0; i < n; ++i) {
    switch (assignment[i]) {
      case 0:
        result.train.push_back(records[i]);
        break;
      case 1:
        result.dev.push_back(records[i]);
        break;
      default:
        result.test.push_back(records[i]);
        break;
    }
  }
  return result;
}

}  // namespace icdpipe::corpus
