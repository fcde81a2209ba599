#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "icdpipe/corpus.hpp"
#include "icdpipe/corpus_io.hpp"
#include "icdpipe/errors.hpp"
#include "testutil.hpp"

using namespace icdpipe;
using namespace icdpipe::corpus;
using testutil::code;
using testutil::make_record;

namespace {

RawRecord raw_record(std::string id, std::string dd, std::string main,
                     std::vector<std::string> others = {}) {
  RawRecord r;
  r.id = std::move(id);
  r.sections[SectionKind::DischargeDiagnosis] = std::move(dd);
  r.main_code = std::move(main);
  r.other_codes = std::move(others);
  return r;
}

}  // namespace

TEST_CASE("clean_corpus drops invalid records with reasons") {
  std::vector<RawRecord> raw;
  raw.push_back(raw_record("good", "clean text", "I10", {"E11.9"}));
  RawRecord no_codes;
  no_codes.id = "nocodes";
  no_codes.sections[SectionKind::DischargeDiagnosis] = "text";
  raw.push_back(no_codes);
  raw.push_back(raw_record("bad", "text", "BAD!"));
  RawRecord no_dd;
  no_dd.id = "nodd";
  no_dd.main_code = "I10";
  raw.push_back(no_dd);
  raw.push_back(raw_record("emptydd", "<p></p>", "I10"));

  auto result = clean_corpus(raw);
  REQUIRE(result.records.size() == 1);
  CHECK(result.records[0].id == "good");
  REQUIRE(result.rejections.size() == 4);
  std::map<std::string, std::string> reasons;
  for (const auto& r : result.rejections) reasons[r.id] = r.reason;
  CHECK(reasons["nocodes"] == "no_codes");
  CHECK(reasons["bad"] == "malformed");
  CHECK(reasons["nodd"] == "empty_discharge_diagnosis");
  CHECK(reasons["emptydd"] == "empty_discharge_diagnosis");
}

TEST_CASE("clean_corpus retains clean records unchanged") {
  auto result = clean_corpus({raw_record("r", "Essential hypertension", "I10",
                                         {"E11.9"})});
  REQUIRE(result.records.size() == 1);
  const auto& rec = result.records[0];
  CHECK(rec.sections.at(SectionKind::DischargeDiagnosis) ==
        "Essential hypertension");
  CHECK(rec.main_code.value() == "I10");
  REQUIRE(rec.other_codes.size() == 1);
  CHECK(rec.other_codes[0].value() == "E11.9");
}

TEST_CASE("clean_corpus normalizes then strips every section") {
  RawRecord r = raw_record(
      "r", "<p>Dx： flu</p>\n[PRINTED 2021-01-01 03:14]", "I10");
  r.sections[SectionKind::MedicalHistory] = "routine   history";
  auto result = clean_corpus({r});
  REQUIRE(result.records.size() == 1);
  CHECK(result.records[0].sections.at(SectionKind::DischargeDiagnosis) ==
        "Dx: flu");
  CHECK(result.records[0].sections.at(SectionKind::MedicalHistory) ==
        "routine history");
}

TEST_CASE("duplicate codes are dropped keep-first with a warning") {
  auto result = clean_corpus(
      {raw_record("r", "text", "I10", {"E11.9", "e11.9", "I10"})});
  REQUIRE(result.records.size() == 1);
  const auto& rec = result.records[0];
  REQUIRE(rec.other_codes.size() == 1);
  CHECK(rec.other_codes[0].value() == "E11.9");
  CHECK(result.warnings.size() == 2);
}

TEST_CASE("clean_corpus in strict mode requires table membership") {
  auto table = CodeTable::from_codes({"I10"});
  CleanOptions options;
  options.code_table = &table;
  auto result = clean_corpus(
      {raw_record("in", "t", "I10"), raw_record("out", "t", "J45.909")},
      options);
  REQUIRE(result.records.size() == 1);
  CHECK(result.records[0].id == "in");
  REQUIRE(result.rejections.size() == 1);
  CHECK(result.rejections[0].reason == "not_in_table");
}

TEST_CASE("clean_corpus never emits a record violating its invariants") {
  DetRng rng(7);
  std::vector<RawRecord> raw;
  const std::string junk[] = {"", "I10", "bad code", "e11.9", "<p></p>",
                              "  ", "I10.XX123", "text，full"};
  for (int i = 0; i < 400; ++i) {
    RawRecord r;
    r.id = "r" + std::to_string(i);
    if (rng.next_below(10) != 0) {
      r.sections[SectionKind::DischargeDiagnosis] =
          junk[rng.next_below(std::size(junk))];
    }
    if (rng.next_below(10) != 0) {
      r.sections[SectionKind::MedicalHistory] =
          junk[rng.next_below(std::size(junk))];
    }
    if (rng.next_below(8) != 0) r.main_code = junk[rng.next_below(std::size(junk))];
    std::size_t n_others = rng.next_below(4);
    for (std::size_t k = 0; k < n_others; ++k) {
      r.other_codes.push_back(junk[rng.next_below(std::size(junk))]);
    }
    raw.push_back(std::move(r));
  }
  auto result = clean_corpus(raw);
  for (const auto& rec : result.records) {
    auto it = rec.sections.find(SectionKind::DischargeDiagnosis);
    REQUIRE(it != rec.sections.end());
    CHECK(!it->second.empty());
    CHECK(IcdCode::parse(rec.main_code.value()).has_value());
    std::set<IcdCode> seen;
    for (const auto& c : rec.other_codes) {
      CHECK(c != rec.main_code);
      CHECK(seen.insert(c).second);
      CHECK(IcdCode::parse(c.value()).has_value());
    }
  }
  // every input line is accounted for: kept or rejected
  std::set<std::string> seen_ids;
  for (const auto& rec : result.records) seen_ids.insert(rec.id);
  for (const auto& rej : result.rejections) seen_ids.insert(rej.id);
  CHECK(seen_ids.size() == raw.size());
}

TEST_CASE("clean_corpus parallel output preserves input order") {
  std::vector<RawRecord> raw;
  for (int i = 0; i < 60; ++i) {
    raw.push_back(raw_record("r" + std::to_string(i), "text", "I10"));
  }
  CleanOptions options;
  options.parallelism = 4;
  auto result = clean_corpus(raw, options);
  REQUIRE(result.records.size() == raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    CHECK(result.records[i].id == raw[i].id);
  }
}

TEST_CASE("code_frequency counts and orders deterministically") {
  CHECK(code_frequency({}).entries.empty());

  auto two = code_frequency({make_record("a", "t", "I10"),
                             make_record("b", "t", "I10")});
  REQUIRE(two.entries.size() == 1);
  CHECK(two.entries[0].first.value() == "I10");
  CHECK(two.entries[0].second == 2);

  // five-record fixture, counted by hand:
  //   I10: r1 main, r2 other, r3 other            -> 3
  //   E11.9: r2 main, r3 main? no -- see below    -> 2
  //   J45: r3 main, r4 main                       -> 2
  //   N18.3: r5 main                              -> 1
  //   Z51.11: r5 other                            -> 1
  std::vector<CodedRecord> records = {
      make_record("r1", "t", "I10"),
      make_record("r2", "t", "E11.9", {"I10"}),
      make_record("r3", "t", "J45", {"I10", "E11.9"}),
      make_record("r4", "t", "J45"),
      make_record("r5", "t", "N18.3", {"Z51.11"}),
  };
  auto table = code_frequency(records);
  REQUIRE(table.entries.size() == 5);
  CHECK(table.entries[0].first.value() == "I10");
  CHECK(table.entries[0].second == 3);
  // count 2 tie broken by code ascending: E11.9 before J45
  CHECK(table.entries[1].first.value() == "E11.9");
  CHECK(table.entries[1].second == 2);
  CHECK(table.entries[2].first.value() == "J45");
  CHECK(table.entries[2].second == 2);
  CHECK(table.entries[3].first.value() == "N18.3");
  CHECK(table.entries[4].first.value() == "Z51.11");

  auto top2 = table.top_k(2);
  REQUIRE(top2.size() == 2);
  CHECK(top2[0].value() == "I10");
  CHECK(top2[1].value() == "E11.9");

  // totals match the sum of per-record code counts
  std::size_t expected_total = 0;
  for (const auto& r : records) expected_total += 1 + r.other_codes.size();
  CHECK(table.total() == expected_total);
}

TEST_CASE("chapter_histogram groups by leading letter") {
  auto one = chapter_histogram({make_record("a", "t", "I10", {"I25.1"})});
  CHECK(one == std::map<char, std::uint64_t>{{'I', 2}});

  auto two = chapter_histogram({make_record("a", "t", "I10", {"E11.9"})});
  CHECK(two == std::map<char, std::uint64_t>{{'E', 1}, {'I', 1}});

  // five-record fixture counted by hand: I:3 E:2 J:2 N:1 Z:1
  std::vector<CodedRecord> records = {
      make_record("r1", "t", "I10"),
      make_record("r2", "t", "E11.9", {"I10"}),
      make_record("r3", "t", "J45", {"I10", "E11.9"}),
      make_record("r4", "t", "J45"),
      make_record("r5", "t", "N18.3", {"Z51.11"}),
  };
  auto hist = chapter_histogram(records);
  CHECK(hist == std::map<char, std::uint64_t>{
                    {'E', 2}, {'I', 3}, {'J', 2}, {'N', 1}, {'Z', 1}});
  std::uint64_t total = 0;
  for (const auto& [chapter, count] : hist) total += count;
  CHECK(total == 9);  // total code occurrences
}

namespace {

std::vector<CodedRecord> synthetic_corpus(std::uint64_t seed, std::size_t n) {
  // label pool with skewed frequencies plus random extras
  DetRng rng(seed);
  const std::vector<std::string> pool = {"I10",   "E11.9", "J45",  "N18.3",
                                         "Z51.11", "C50.9", "K21.9"};
  std::vector<CodedRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    std::string main = pool[rng.next_below(pool.size())];
    std::vector<std::string> others;
    std::size_t extra = rng.next_below(3);
    for (std::size_t k = 0; k < extra; ++k) {
      std::string c = pool[rng.next_below(pool.size())];
      if (c != main &&
          std::find(others.begin(), others.end(), c) == others.end()) {
        others.push_back(c);
      }
    }
    records.push_back(
        make_record("r" + std::to_string(i), "text", main, others));
  }
  return records;
}

std::map<std::string, int> label_tally(const std::vector<CodedRecord>& split) {
  // independent brute-force recount of label occurrences
  std::map<std::string, int> tally;
  for (const auto& r : split) {
    std::set<std::string> labels{r.main_code.value()};
    for (const auto& c : r.other_codes) labels.insert(c.value());
    for (const auto& l : labels) tally[l] += 1;
  }
  return tally;
}

}  // namespace

TEST_CASE("stratified_split: forced sizes for identical single-label records") {
  std::vector<CodedRecord> records;
  for (int i = 0; i < 10; ++i) {
    records.push_back(make_record("r" + std::to_string(i), "t", "I10"));
  }
  auto split = stratified_split(records, SplitRatios{0.8, 0.1, 0.1}, 0);
  CHECK(split.train.size() == 8);
  CHECK(split.dev.size() == 1);
  CHECK(split.test.size() == 1);
}

TEST_CASE("stratified_split is deterministic for a fixed seed") {
  auto records = synthetic_corpus(5, 120);
  auto a = stratified_split(records, SplitRatios{0.8, 0.1, 0.1}, 7);
  auto b = stratified_split(records, SplitRatios{0.8, 0.1, 0.1}, 7);
  auto ids = [](const std::vector<CodedRecord>& v) {
    std::vector<std::string> out;
    for (const auto& r : v) out.push_back(r.id);
    return out;
  };
  CHECK(ids(a.train) == ids(b.train));
  CHECK(ids(a.dev) == ids(b.dev));
  CHECK(ids(a.test) == ids(b.test));
}

TEST_CASE("stratified_split partitions exactly") {
  DetRng seed_rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    auto records = synthetic_corpus(seed_rng.next(), 40 + trial * 17);
    auto split = stratified_split(records, SplitRatios{0.8, 0.1, 0.1}, trial);
    std::set<std::string> seen;
    for (const auto* part : {&split.train, &split.dev, &split.test}) {
      for (const auto& r : *part) {
        CHECK(seen.insert(r.id).second);  // disjoint
      }
    }
    CHECK(seen.size() == records.size());  // covering
  }
}

TEST_CASE("stratified_split 100-record fixture: per-label counts within one") {
  // 16-label fixture with moderate co-occurrence; a fully entangled label
  // set cannot satisfy the per-label bound for any assignment
  DetRng rng(5);
  std::vector<std::string> pool;
  const char* letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  for (std::size_t i = 0; i < 16; ++i) {
    pool.push_back(std::string(1, letters[i]) + std::to_string(10 + i / 26));
  }
  std::vector<CodedRecord> records;
  for (std::size_t i = 0; i < 100; ++i) {
    CodedRecord r = make_record("r" + std::to_string(i), "text",
                                pool[rng.next_below(pool.size())]);
    if (rng.next_below(10) >= 5) {
      std::size_t extra = 1 + rng.next_below(2);
      for (std::size_t e = 0; e < extra; ++e) {
        auto c = code(pool[rng.next_below(pool.size())]);
        if (c != r.main_code &&
            std::find(r.other_codes.begin(), r.other_codes.end(), c) ==
                r.other_codes.end()) {
          r.other_codes.push_back(c);
        }
      }
    }
    records.push_back(std::move(r));
  }
  auto split = stratified_split(records, SplitRatios{0.8, 0.1, 0.1}, 0);

  auto total_tally = label_tally(records);
  auto train_tally = label_tally(split.train);
  auto dev_tally = label_tally(split.dev);
  auto test_tally = label_tally(split.test);
  for (const auto& [label, count] : total_tally) {
    CHECK(std::abs(train_tally[label] - 0.8 * count) <= 1.0 + 1e-9);
    CHECK(std::abs(dev_tally[label] - 0.1 * count) <= 1.0 + 1e-9);
    CHECK(std::abs(test_tally[label] - 0.1 * count) <= 1.0 + 1e-9);
  }
}

TEST_CASE("stratified_split keeps train share near 0.8 for common labels") {
  DetRng seed_rng(123);
  for (int trial = 0; trial < 8; ++trial) {
    auto records = synthetic_corpus(seed_rng.next(), 150);
    auto split =
        stratified_split(records, SplitRatios{0.8, 0.1, 0.1}, trial * 3);
    auto total_tally = label_tally(records);
    auto train_tally = label_tally(split.train);
    for (const auto& [label, count] : total_tally) {
      if (count < 10) continue;
      double share = double(train_tally[label]) / double(count);
      CHECK(std::abs(share - 0.8) <= 0.1);
    }
    // overall sizes near the ratios
    double n = double(records.size());
    CHECK(std::abs(double(split.train.size()) - 0.8 * n) <= 3.0);
    CHECK(std::abs(double(split.dev.size()) - 0.1 * n) <= 3.0);
    CHECK(std::abs(double(split.test.size()) - 0.1 * n) <= 3.0);
  }
}

TEST_CASE("split sizes stay within three of target on a large corpus") {
  auto records = synthetic_corpus(3131, 5000);
  auto split = stratified_split(records, SplitRatios{0.8, 0.1, 0.1}, 1);
  CHECK(std::abs(double(split.train.size()) - 4000.0) <= 3.0);
  CHECK(std::abs(double(split.dev.size()) - 500.0) <= 3.0);
  CHECK(std::abs(double(split.test.size()) - 500.0) <= 3.0);
  // the caps must not degrade per-label stratification
  auto total = label_tally(records);
  auto train = label_tally(split.train);
  for (const auto& [label, count] : total) {
    if (count < 10) continue;
    CHECK(std::abs(double(train[label]) / double(count) - 0.8) <= 0.1);
  }
}

TEST_CASE("stratified_split input validation") {
  CHECK_THROWS_AS(stratified_split({}, SplitRatios{0.8, 0.1, 0.1}, 0),
                  EmptyInputError);
  CHECK_THROWS_AS(
      stratified_split({make_record("r", "t", "I10")},
                       SplitRatios{0.8, 0.3, 0.1}, 0),
      ValidationError);
  CHECK_THROWS_AS(
      stratified_split({make_record("r", "t", "I10")},
                       SplitRatios{1.0, 0.0, 0.0}, 0),
      ValidationError);
}

TEST_CASE("jsonl round trip preserves records") {
  std::vector<CodedRecord> records = {
      make_record("r1", "diagnosis text", "I10", {"E11.9"}),
  };
  records[0].sections[SectionKind::OperationNote] = "op note";
  std::ostringstream out;
  write_records_jsonl(out, records);
  std::istringstream in(out.str());
  auto raw = read_raw_jsonl(in);
  REQUIRE(raw.size() == 1);
  CHECK(raw[0].id == "r1");
  CHECK(raw[0].main_code == "I10");
  CHECK(raw[0].sections.at(SectionKind::OperationNote) == "op note");
  CHECK(raw[0].sections.count(SectionKind::MedicalHistory) == 0);  // null
}

TEST_CASE("invalid jsonl lines raise IoError") {
  std::istringstream in("{\"id\": \"ok\"}\nnot json\n");
  CHECK_THROWS_AS(read_raw_jsonl(in), IoError);
}
