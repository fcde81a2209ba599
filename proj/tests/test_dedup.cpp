#include <doctest.h>

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "icdpipe/dedup.hpp"
#include "icdpipe/errors.hpp"
#include "icdpipe/modelclient.hpp"
#include "testutil.hpp"

using namespace icdpipe;
using namespace icdpipe::dedup;
using icdpipe::model::EmbeddingVector;
using icdpipe::model::MockClient;
using testutil::make_record;

namespace {

EmbeddingVector unit(std::initializer_list<double> values) {
  Eigen::VectorXd v(Eigen::Index(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  v /= v.norm();
  return {v};
}

}  // namespace

TEST_CASE("similarity and distance are two views of one quantity") {
  CHECK(similarity_from_l2(0.0) == doctest::Approx(1.0));
  CHECK(similarity_from_l2(std::sqrt(2.0)) == doctest::Approx(0.0));
  CHECK(similarity_from_l2(2.0) == doctest::Approx(-1.0));
}

TEST_CASE("exact index basics") {
  SUBCASE("two identical vectors are mutual neighbors at distance zero") {
    auto index = build_index({unit({1, 0}), unit({1, 0})});
    auto hit = index->nearest(0);
    REQUIRE(hit);
    CHECK(hit->index == 1);
    CHECK(hit->l2_distance == doctest::Approx(0.0));
    CHECK(hit->similarity == doctest::Approx(1.0));
    CHECK(index->nearest(1)->index == 0);
  }
  SUBCASE("orthogonal unit vectors sit at distance sqrt(2)") {
    auto index = build_index({unit({1, 0}), unit({0, 1})});
    auto hit = index->nearest(0);
    REQUIRE(hit);
    CHECK(hit->l2_distance == doctest::Approx(std::sqrt(2.0)));
    CHECK(hit->similarity == doctest::Approx(0.0));
  }
  SUBCASE("a single vector has no neighbor") {
    auto index = build_index({unit({1, 0})});
    CHECK(!index->nearest(0).has_value());
  }
  SUBCASE("input validation") {
    CHECK_THROWS_AS(build_index({}), EmptyInputError);
    Eigen::VectorXd three = Eigen::VectorXd::Ones(3) / std::sqrt(3.0);
    CHECK_THROWS_AS(build_index({unit({1, 0}), EmbeddingVector{three}}),
                    DimensionMismatchError);
    Eigen::VectorXd unnormalized = Eigen::VectorXd::Ones(2);
    CHECK_THROWS_AS(build_index({EmbeddingVector{unnormalized}}),
                    ValidationError);
  }
}

TEST_CASE("find_redundant_pairs applies both the similarity and code test") {
  double c = 0.95, s = std::sqrt(1.0 - 0.95 * 0.95);
  std::vector<EmbeddingVector> close = {unit({1, 0}), unit({c, s})};
  std::vector<EmbeddingVector> far = {
      unit({1, 0}), unit({0.85, std::sqrt(1.0 - 0.85 * 0.85)})};

  auto same = {make_record("a", "text one", "I10"),
               make_record("b", "text two", "I10")};
  auto differing = {make_record("a", "text one", "I10"),
                    make_record("b", "text two", "I10", {"E11.9"})};

  SUBCASE("identical codes above threshold pair up") {
    auto pairs = find_redundant_pairs(same, close, 0.9);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].low_id == "a");
    CHECK(pairs[0].high_id == "b");
    CHECK(pairs[0].similarity == doctest::Approx(0.95));
  }
  SUBCASE("differing code sets never pair, even at similarity 1") {
    std::vector<EmbeddingVector> identical = {unit({1, 0}), unit({1, 0})};
    CHECK(find_redundant_pairs(differing, identical, 0.9).empty());
  }
  SUBCASE("below the threshold nothing pairs") {
    CHECK(find_redundant_pairs(same, far, 0.9).empty());
  }
  SUBCASE("threshold bounds are validated") {
    CHECK_THROWS_AS(find_redundant_pairs(same, close, 1.5), ValidationError);
    std::vector<CodedRecord> one = {make_record("a", "t", "I10")};
    CHECK_THROWS_AS(find_redundant_pairs(one, close, 0.9), AlignmentError);
  }
}

TEST_CASE("resolve_pair retention rules") {
  auto a = make_record("a", "short", "I10");
  auto b = make_record("b", "a considerably longer discharge text", "I10");

  SUBCASE("ppl rule keeps the higher-perplexity record") {
    auto d = resolve_pair(a, b, 12.0, 11.0);  // 12.0 >= 1.05 * 11.0
    CHECK(d.kept_id == "a");
    CHECK(d.removed_id == "b");
    CHECK(d.rule == RetentionRule::Ppl);
    CHECK(*d.ppl_kept == doctest::Approx(12.0));
    CHECK(*d.ppl_removed == doctest::Approx(11.0));
  }
  SUBCASE("ratio exactly at the margin still triggers the ppl rule") {
    auto d = resolve_pair(a, b, 1.05, 1.0);
    CHECK(d.rule == RetentionRule::Ppl);
    CHECK(d.kept_id == "a");
  }
  SUBCASE("inside the margin the longer text wins") {
    auto d = resolve_pair(a, b, 10.2, 10.0);  // 10.2 < 10.5
    CHECK(d.rule == RetentionRule::Length);
    CHECK(d.kept_id == "b");
  }
  SUBCASE("just below the margin uses length") {
    auto d = resolve_pair(a, b, 1.049, 1.0);
    CHECK(d.rule == RetentionRule::Length);
    CHECK(d.kept_id == "b");
  }
  SUBCASE("equal ppl and equal length keep the smaller id") {
    auto r1 = make_record("r1", "same text", "I10");
    auto r2 = make_record("r2", "text same", "I10");
    auto d = resolve_pair(r2, r1, 3.0, 3.0);
    CHECK(d.rule == RetentionRule::Length);
    CHECK(d.kept_id == "r1");
    CHECK(d.removed_id == "r2");
  }
}

TEST_CASE("three identical records lose two members") {
  std::vector<CodedRecord> records = {
      make_record("r1", "the same discharge text", "I10"),
      make_record("r2", "the same discharge text", "I10"),
      make_record("r3", "the same discharge text", "I10"),
  };
  MockClient client(3, 32);
  auto [kept, report] = deduplicate(records, client, {});
  CHECK(report.before_count == 3);
  CHECK(report.after_count == 1);
  CHECK(report.decisions.size() == 2);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].id == "r1");  // equal text, equal ppl -> smallest id kept
}

TEST_CASE("a corpus without near-duplicates is untouched") {
  std::vector<CodedRecord> records = {
      make_record("a", "fracture of the left radius after a fall", "S52.501A"),
      make_record("b", "chronic kidney disease on dialysis", "N18.3"),
      make_record("c", "acute asthma exacerbation, stable on steroids",
                  "J45.901"),
  };
  MockClient client(3, 64);
  auto [kept, report] = deduplicate(records, client, {});
  CHECK(report.decisions.empty());
  CHECK(kept.size() == 3);
  CHECK(report.after_count + report.decisions.size() == report.before_count);
}

// ---------------------------------------------------------------------
// Brute-force oracle: all-pairs nearest neighbor, threshold and code-set
// filter, similarity-ordered greedy resolution. Plain loops only.

namespace {

struct OraclePair {
  std::string low, high;
  double sim;
};

std::set<std::string> oracle_removals(
    const std::vector<CodedRecord>& records,
    const std::vector<EmbeddingVector>& vectors,
    const std::unordered_map<std::string, double>& ppl, double threshold,
    double margin) {
  const std::size_t n = records.size();
  std::map<std::pair<std::string, std::string>, double> pair_sims;
  for (std::size_t q = 0; q < n; ++q) {
    // nearest neighbor by exhaustive scan, smallest index on ties
    std::size_t best = n;
    double best_cos = -2.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == q) continue;
      double cos = vectors[i].values.dot(vectors[q].values);
      if (cos > best_cos) {
        best_cos = cos;
        best = i;
      }
    }
    if (best == n || best_cos <= threshold) continue;
    std::set<IcdCode> ca, cb;
    ca.insert(records[q].main_code);
    for (const auto& c : records[q].other_codes) ca.insert(c);
    cb.insert(records[best].main_code);
    for (const auto& c : records[best].other_codes) cb.insert(c);
    if (ca != cb) continue;
    auto key = records[q].id < records[best].id
                   ? std::make_pair(records[q].id, records[best].id)
                   : std::make_pair(records[best].id, records[q].id);
    double recomputed = vectors[q].values.dot(vectors[best].values);
    auto [it, inserted] = pair_sims.emplace(key, recomputed);
    if (!inserted) it->second = std::max(it->second, recomputed);
  }

  std::vector<OraclePair> pairs;
  for (const auto& [key, sim] : pair_sims) {
    pairs.push_back({key.first, key.second, sim});
  }
  std::sort(pairs.begin(), pairs.end(), [](const OraclePair& x,
                                           const OraclePair& y) {
    if (x.sim != y.sim) return x.sim > y.sim;
    if (x.low != y.low) return x.low < y.low;
    return x.high < y.high;
  });

  std::unordered_map<std::string, const CodedRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  auto text_length = [&](const std::string& id) {
    const std::string& text = by_id.at(id)->joined_text();
    std::size_t count = 0;
    for (unsigned char c : text) {
      if ((c & 0xC0) != 0x80) ++count;
    }
    return count;
  };

  std::set<std::string> removed;
  for (const auto& pair : pairs) {
    if (removed.count(pair.low) || removed.count(pair.high)) continue;
    double pa = ppl.at(pair.low), pb = ppl.at(pair.high);
    std::string loser;
    if (std::max(pa, pb) >= (1.0 + margin) * std::min(pa, pb)) {
      loser = pa >= pb ? pair.high : pair.low;
    } else {
      std::size_t la = text_length(pair.low), lb = text_length(pair.high);
      if (la != lb) {
        loser = la > lb ? pair.high : pair.low;
      } else {
        loser = pair.high;  // ids are ordered, keep the smaller
      }
    }
    removed.insert(loser);
  }
  return removed;
}

std::vector<CodedRecord> duplicate_cluster_corpus(DetRng& rng, std::size_t n) {
  std::vector<CodedRecord> records;
  std::size_t id = 0;
  while (records.size() < n) {
    std::string base = testutil::random_text(rng, 20 + rng.next_below(30));
    std::string main = testutil::random_code(rng);
    std::vector<std::string> others;
    if (rng.next_below(2) == 0) others.push_back(testutil::random_code(rng));
    std::size_t cluster = 1 + rng.next_below(3);
    for (std::size_t c = 0; c < cluster && records.size() < n; ++c) {
      std::string text = base;
      // perturb: append a few extra words
      std::size_t extra = rng.next_below(3);
      for (std::size_t e = 0; e < extra; ++e) {
        text += " " + testutil::random_text(rng, 1);
      }
      bool same_codes = rng.next_below(5) != 0;
      std::string m = main;
      auto o = others;
      if (!same_codes) o.push_back(testutil::random_code(rng));
      char buffer[16];
      std::snprintf(buffer, sizeof buffer, "r%04zu", id++);
      auto record = make_record(buffer, text, m);
      for (auto& oc : o) {
        auto code = IcdCode::parse(oc);
        if (code && *code != record.main_code &&
            std::find(record.other_codes.begin(), record.other_codes.end(),
                      *code) == record.other_codes.end()) {
          record.other_codes.push_back(*code);
        }
      }
      records.push_back(std::move(record));
    }
  }
  return records;
}

}  // namespace

TEST_CASE("deduplicate matches the brute-force oracle on random corpora") {
  DetRng rng(606);
  MockClient client(11, 48);
  for (int trial = 0; trial < 6; ++trial) {
    auto records = duplicate_cluster_corpus(rng, 60 + trial * 20);
    std::vector<EmbeddingVector> vectors;
    std::unordered_map<std::string, double> ppl;
    for (const auto& r : records) {
      vectors.push_back(client.embed(r.joined_text()));
      ppl[r.id] = model::perplexity(client.token_logprobs(r.joined_text()));
    }
    DedupOptions options;
    options.threshold = 0.9;
    auto [kept, report] = deduplicate(records, client, options);

    auto expected = oracle_removals(records, vectors, ppl, 0.9, 0.05);
    std::set<std::string> actual;
    for (const auto& d : report.decisions) actual.insert(d.removed_id);
    CHECK(actual == expected);
    CHECK(report.after_count == records.size() - expected.size());
  }
}

TEST_CASE("raising the threshold never removes more records") {
  DetRng rng(607);
  MockClient client(13, 48);
  for (int trial = 0; trial < 4; ++trial) {
    auto records = duplicate_cluster_corpus(rng, 80);
    std::size_t previous = records.size() + 1;
    for (double threshold : {0.8, 0.9, 0.95}) {
      DedupOptions options;
      options.threshold = threshold;
      auto [kept, report] = deduplicate(records, client, options);
      CHECK(report.decisions.size() <= previous);
      previous = report.decisions.size();
      // conservation at every threshold
      CHECK(report.after_count + report.decisions.size() ==
            report.before_count);
    }
  }
}

TEST_CASE("records with differing code sets survive any similarity") {
  DetRng rng(608);
  MockClient client(17, 48);
  auto records = duplicate_cluster_corpus(rng, 100);
  DedupOptions options;
  options.threshold = 0.8;
  auto [kept, report] = deduplicate(records, client, options);
  std::unordered_map<std::string, const CodedRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  for (const auto& d : report.decisions) {
    CHECK(by_id.at(d.kept_id)->code_set() == by_id.at(d.removed_id)->code_set());
  }
}

TEST_CASE("deduplicate is deterministic down to the report bytes") {
  DetRng rng(609);
  auto records = duplicate_cluster_corpus(rng, 70);
  MockClient client(19, 48);
  auto [kept1, report1] = deduplicate(records, client, {});
  auto [kept2, report2] = deduplicate(records, client, {});
  CHECK(report_to_json(report1) == report_to_json(report2));
  REQUIRE(kept1.size() == kept2.size());
  for (std::size_t i = 0; i < kept1.size(); ++i) {
    CHECK(kept1[i].id == kept2[i].id);
  }
}

TEST_CASE("dedup report carries chapter statistics and the client identity") {
  std::vector<CodedRecord> records = {
      make_record("a", "identical words here", "I10"),
      make_record("b", "identical words here", "I10"),
      make_record("c", "something about the kidneys", "N18.3"),
  };
  MockClient client(3, 32);
  auto [kept, report] = deduplicate(records, client, {});
  REQUIRE(report.decisions.size() == 1);
  CHECK(report.chapter_reduction.at('I').first == 2);
  CHECK(report.chapter_reduction.at('I').second == 1);
  CHECK(report.chapter_reduction.at('N').first == 1);
  CHECK(report.chapter_reduction.at('N').second == 1);
  CHECK(report.client == "mock(seed=3)");
  CHECK(report.threshold == doctest::Approx(0.9));
  // output order preserves input order
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].id == "a");
  CHECK(kept[1].id == "c");
}

TEST_CASE("the ANN index reaches the recall bar on the benchmark fixture") {
  // fixture: clustered corpus, pairs judged at threshold 0.9
  DetRng rng(610);
  MockClient client(23, 48);
  auto records = duplicate_cluster_corpus(rng, 250);
  std::vector<EmbeddingVector> vectors;
  for (const auto& r : records) vectors.push_back(client.embed(r.joined_text()));

  auto exact = build_index(vectors, IndexKind::Exact);
  auto ann = build_index(vectors, IndexKind::Ann, 0);
  std::size_t relevant = 0, found = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto truth = exact->nearest(Eigen::Index(i));
    if (!truth || truth->similarity <= 0.9) continue;
    ++relevant;
    auto hit = ann->nearest(Eigen::Index(i));
    if (hit && hit->similarity >= truth->similarity - 1e-12) ++found;
  }
  REQUIRE(relevant > 20);  // the fixture must actually exercise the bar
  CHECK(double(found) >= 0.99 * double(relevant));
}

TEST_CASE("neighbor hits satisfy the similarity/distance relation") {
  DetRng rng(611);
  MockClient client(29, 32);
  std::vector<CodedRecord> records;
  std::vector<EmbeddingVector> vectors;
  for (int i = 0; i < 25; ++i) {
    auto r = make_record("r" + std::to_string(i),
                         testutil::random_text(rng, 5 + rng.next_below(20)),
                         testutil::random_code(rng));
    vectors.push_back(client.embed(r.joined_text()));
    records.push_back(std::move(r));
  }
  auto hits = neighbor_hits(records, vectors);
  CHECK(hits.size() == records.size());
  for (const auto& hit : hits) {
    CHECK(hit.query_id != hit.neighbor_id);
    CHECK(hit.l2_distance >= 0.0);
    CHECK(std::abs(hit.similarity -
                   similarity_from_l2(hit.l2_distance)) <= 1e-6);
    CHECK(hit.similarity <= 1.0 + 1e-12);
    CHECK(hit.similarity >= -1.0 - 1e-12);
  }
}

TEST_CASE("pearson closed forms") {
  std::vector<double> x = {1, 2, 3, 4};
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 1);
  CHECK(pearson(x, y) == doctest::Approx(1.0));
  std::vector<double> neg;
  for (double v : x) neg.push_back(-v);
  CHECK(pearson(x, neg) == doctest::Approx(-1.0));
  CHECK(pearson({1, 2, 3}, {1, 3, 2}) == doctest::Approx(0.5));

  CHECK_THROWS_AS(pearson({1, 2}, {1, 2, 3}), AlignmentError);
  CHECK_THROWS_AS(pearson({1}, {1}), DegenerateInputError);
  CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), DegenerateInputError);
}

TEST_CASE("pearson accepts Eigen expressions directly") {
  Eigen::VectorXd x(3), y(3);
  x << 1, 2, 3;
  y << 2, 4, 6;
  CHECK(pearson(x, y) == doctest::Approx(1.0));
  CHECK(pearson(x, (-1.0 * y).eval()) == doctest::Approx(-1.0));
}
