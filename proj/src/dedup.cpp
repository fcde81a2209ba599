#include "icdpipe/dedup.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "icdpipe/corpus.hpp"
#include "icdpipe/hashing.hpp"
#include "icdpipe/parallel.hpp"

namespace icdpipe::dedup {

using nlohmann::json;

namespace {

Eigen::MatrixXd pack_vectors(const std::vector<model::EmbeddingVector>& vectors) {
  if (vectors.empty()) throw EmptyInputError("build_index: no vectors");
  const Eigen::Index dim = vectors.front().dim();
  Eigen::MatrixXd points(dim, static_cast<Eigen::Index>(vectors.size()));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].dim() != dim) {
      throw DimensionMismatchError(
          "build_index: vector " + std::to_string(i) + " has dim " +
          std::to_string(vectors[i].dim()) + ", expected " +
          std::to_string(dim));
    }
    if (std::abs(vectors[i].values.norm() - 1.0) > 1e-6) {
      throw ValidationError("build_index: vector " + std::to_string(i) +
                            " is not unit-normalized");
    }
    points.col(static_cast<Eigen::Index>(i)) = vectors[i].values;
  }
  return points;
}

NearestNeighborIndex::Hit hit_from_cosine(Eigen::Index index, double cosine) {
  double d2 = std::max(0.0, 2.0 - 2.0 * cosine);
  return {index, std::sqrt(d2), cosine};
}

class ExactIndex final : public NearestNeighborIndex {
 public:
  explicit ExactIndex(Eigen::MatrixXd points) : points_(std::move(points)) {}

  std::optional<Hit> nearest(Eigen::Index query) const override {
    const Eigen::Index n = points_.cols();
    if (n < 2) return std::nullopt;
    Eigen::VectorXd cosines = points_.transpose() * points_.col(query);
    Eigen::Index best = -1;
    double best_cos = -2.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == query) continue;
      if (cosines[i] > best_cos) {
        best_cos = cosines[i];
        best = i;
      }
    }
    return hit_from_cosine(best, best_cos);
  }

  Eigen::Index size() const override { return points_.cols(); }

 private:
  Eigen::MatrixXd points_;
};

// Random-hyperplane LSH: L tables of b sign bits. Candidates are bucket
// mates from any table; distances are then computed exactly.
class LshIndex final : public NearestNeighborIndex {
 public:
  LshIndex(Eigen::MatrixXd points, std::uint64_t seed)
      : points_(std::move(points)) {
    const Eigen::Index dim = points_.rows();
    const Eigen::Index n = points_.cols();
    DetRng rng(splitmix64(seed ^ 0x6c7368ULL));
    auto gaussian = [&rng] {
      // Box-Muller from two deterministic uniforms
      double u1 = std::max(rng.next_double(), 1e-12);
      double u2 = rng.next_double();
      return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    };
    planes_.resize(kTables);
    buckets_.resize(kTables);
    for (int t = 0; t < kTables; ++t) {
      planes_[t] = Eigen::MatrixXd(dim, kBits);
      for (Eigen::Index c = 0; c < kBits; ++c) {
        for (Eigen::Index r = 0; r < dim; ++r) planes_[t](r, c) = gaussian();
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        buckets_[t][key_of(t, points_.col(i))].push_back(i);
      }
    }
  }

  std::optional<Hit> nearest(Eigen::Index query) const override {
    if (points_.cols() < 2) return std::nullopt;
    std::unordered_set<Eigen::Index> candidates;
    for (int t = 0; t < kTables; ++t) {
      auto it = buckets_[t].find(key_of(t, points_.col(query)));
      if (it == buckets_[t].end()) continue;
      for (Eigen::Index i : it->second) {
        if (i != query) candidates.insert(i);
      }
    }
    if (candidates.empty()) return std::nullopt;
    Eigen::Index best = -1;
    double best_cos = -2.0;
    for (Eigen::Index i : candidates) {
      double c = points_.col(i).dot(points_.col(query));
      if (c > best_cos || (c == best_cos && i < best)) {
        best_cos = c;
        best = i;
      }
    }
    return hit_from_cosine(best, best_cos);
  }

  Eigen::Index size() const override { return points_.cols(); }

 private:
  static constexpr int kTables = 24;
  static constexpr Eigen::Index kBits = 6;

  std::uint64_t key_of(int table, const Eigen::VectorXd& v) const {
    Eigen::VectorXd proj = planes_[table].transpose() * v;
    std::uint64_t key = 0;
    for (Eigen::Index b = 0; b < kBits; ++b) {
      key = (key << 1) | (proj[b] >= 0.0 ? 1u : 0u);
    }
    return key;
  }

  Eigen::MatrixXd points_;
  std::vector<Eigen::MatrixXd> planes_;
  std::vector<std::unordered_map<std::uint64_t, std::vector<Eigen::Index>>>
      buckets_;
};

}  // namespace

std::unique_ptr<NearestNeighborIndex> build_index(
    const std::vector<model::EmbeddingVector>& vectors, IndexKind kind,
    std::uint64_t seed) {
  Eigen::MatrixXd points = pack_vectors(vectors);
  if (kind == IndexKind::Exact) {
    return std::make_unique<ExactIndex>(std::move(points));
  }
  return std::make_unique<LshIndex>(std::move(points), seed);
}

std::vector<NeighborHit> neighbor_hits(
    const std::vector<CodedRecord>& records,
    const std::vector<model::EmbeddingVector>& vectors,
    const NearestNeighborIndex* index) {
  if (records.size() != vectors.size()) {
    throw AlignmentError("neighbor_hits: records and vectors differ");
  }
  std::unique_ptr<NearestNeighborIndex> owned;
  if (index == nullptr) {
    owned = build_index(vectors);
    index = owned.get();
  }
  std::vector<NeighborHit> hits;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto hit = index->nearest(static_cast<Eigen::Index>(i));
    if (!hit) continue;
    hits.push_back({records[i].id,
                    records[static_cast<std::size_t>(hit->index)].id,
                    hit->l2_distance, hit->similarity});
  }
  return hits;
}

std::vector<CandidatePair> find_redundant_pairs(
    const std::vector<CodedRecord>& records,
    const std::vector<model::EmbeddingVector>& vectors, double threshold,
    const NearestNeighborIndex* index) {
  if (records.size() != vectors.size()) {
    throw AlignmentError("find_redundant_pairs: records and vectors differ");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError("similarity threshold must lie in (0,1)");
  }
  std::unique_ptr<NearestNeighborIndex> owned;
  if (index == nullptr) {
    owned = build_index(vectors);
    index = owned.get();
  }
  std::map<std::pair<std::string, std::string>, double> best;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto hit = index->nearest(static_cast<Eigen::Index>(i));
    if (!hit) continue;
    // the definitional similarity of the pair, independent of how the
    // index ranked its candidates internally
    double similarity = vectors[i].values.dot(
        vectors[static_cast<std::size_t>(hit->index)].values);
    if (similarity <= threshold) continue;
    const CodedRecord& a = records[i];
    const CodedRecord& b = records[static_cast<std::size_t>(hit->index)];
    if (a.code_set() != b.code_set()) continue;
    auto key = a.id < b.id ? std::make_pair(a.id, b.id)
                           : std::make_pair(b.id, a.id);
    auto [it, inserted] = best.emplace(key, similarity);
    if (!inserted) it->second = std::max(it->second, similarity);
  }
  std::vector<CandidatePair> pairs;
  pairs.reserve(best.size());
  for (const auto& [key, similarity] : best) {
    pairs.push_back({key.first, key.second, similarity});
  }
  return pairs;
}

DedupDecision resolve_pair(const CodedRecord& a, const CodedRecord& b,
                           double ppl_a, double ppl_b, double ppl_margin,
                           double similarity) {
  auto codepoints = [](const std::string& text) {
    std::size_t count = 0;
    for (unsigned char c : text) {
      if ((c & 0xC0) != 0x80) ++count;
    }
    return count;
  };
  const CodedRecord* keep = nullptr;
  const CodedRecord* drop = nullptr;
  RetentionRule rule;
  double hi = std::max(ppl_a, ppl_b);
  double lo = std::min(ppl_a, ppl_b);
  if (hi >= (1.0 + ppl_margin) * lo) {
    rule = RetentionRule::Ppl;
    keep = ppl_a >= ppl_b ? &a : &b;
  } else {
    rule = RetentionRule::Length;
    std::size_t len_a = codepoints(a.joined_text());
    std::size_t len_b = codepoints(b.joined_text());
    if (len_a != len_b) {
      keep = len_a > len_b ? &a : &b;
    } else {
      keep = a.id < b.id ? &a : &b;
    }
  }
  drop = keep == &a ? &b : &a;
  DedupDecision decision;
  decision.kept_id = keep->id;
  decision.removed_id = drop->id;
  decision.rule = rule;
  decision.ppl_kept = keep == &a ? ppl_a : ppl_b;
  decision.ppl_removed = keep == &a ? ppl_b : ppl_a;
  decision.similarity = similarity;
  return decision;
}

namespace {

std::map<char, std::uint64_t> chapter_counts(
    const std::vector<CodedRecord>& records) {
  return corpus::chapter_histogram(records);
}

}  // namespace

std::pair<std::vector<CodedRecord>, DedupReport> deduplicate(
    const std::vector<CodedRecord>& records, model::ModelClient& client,
    const DedupOptions& options) {
  {
    std::unordered_set<std::string> ids;
    for (const auto& r : records) {
      if (!ids.insert(r.id).second) {
        throw ValidationError("deduplicate: duplicate record id '" + r.id +
                              "'");
      }
    }
  }
  DedupReport report;
  report.before_count = records.size();
  report.threshold = options.threshold;
  report.ppl_margin = options.ppl_margin;
  report.similarity_definition =
      "cosine on unit vectors; equals 1 - L2^2/2, so threshold " +
      std::to_string(options.threshold) + " is L2 <= sqrt(" +
      std::to_string(2.0 * (1.0 - options.threshold)) + ")";
  report.client = client.describe();

  if (records.empty()) {
    report.after_count = 0;
    return {records, report};
  }

  const std::size_t n = records.size();
  std::vector<model::EmbeddingVector> vectors(n);
  parallel_for(n, std::max<std::size_t>(options.parallelism, 1),
               [&](std::size_t i) {
                 try {
                   vectors[i] = client.embed(records[i].joined_text());
                 } catch (const TransportError& e) {
                   throw TransportError("record '" + records[i].id +
                                        "': " + e.what());
                 } catch (const Error& e) {
                   throw Error("record '" + records[i].id + "': " + e.what());
                 }
               });

  auto index = build_index(vectors, options.index, options.seed);
  auto pairs =
      find_redundant_pairs(records, vectors, options.threshold, index.get());

  // perplexity only for records that appear in some candidate pair
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < n; ++i) by_id[records[i].id] = i;
  std::vector<std::string> involved;
  {
    std::set<std::string> involved_set;
    for (const auto& pair : pairs) {
      involved_set.insert(pair.low_id);
      involved_set.insert(pair.high_id);
    }
    involved.assign(involved_set.begin(), involved_set.end());
  }
  std::unordered_map<std::string, double> ppl;
  {
    std::vector<double> values(involved.size());
    parallel_for(involved.size(),
                 std::max<std::size_t>(options.parallelism, 1),
                 [&](std::size_t i) {
                   const CodedRecord& r = records[by_id[involved[i]]];
                   try {
                     values[i] = model::perplexity(
                         client.token_logprobs(r.joined_text()));
                   } catch (const TransportError& e) {
                     throw TransportError("record '" + r.id + "': " + e.what());
                   } catch (const Error& e) {
                     throw Error("record '" + r.id + "': " + e.what());
                   }
                 });
    for (std::size_t i = 0; i < involved.size(); ++i) {
      ppl[involved[i]] = values[i];
    }
  }

  // Greedy resolution in decreasing-similarity order (ties by id pair), so
  // a higher threshold always processes a prefix of the same pair list and
  // can never remove more records.
  std::sort(pairs.begin(), pairs.end(), [](const CandidatePair& x,
                                           const CandidatePair& y) {
    if (x.similarity != y.similarity) return x.similarity > y.similarity;
    if (x.low_id != y.low_id) return x.low_id < y.low_id;
    return x.high_id < y.high_id;
  });
  std::unordered_set<std::string> removed;
  for (const auto& pair : pairs) {
    if (removed.count(pair.low_id) || removed.count(pair.high_id)) continue;
    const CodedRecord& a = records[by_id[pair.low_id]];
    const CodedRecord& b = records[by_id[pair.high_id]];
    DedupDecision decision = resolve_pair(a, b, ppl[a.id], ppl[b.id],
                                          options.ppl_margin, pair.similarity);
    removed.insert(decision.removed_id);
    report.decisions.push_back(std::move(decision));
  }

  std::vector<CodedRecord> kept;
  kept.reserve(n - removed.size());
  for (const auto& record : records) {
    if (!removed.count(record.id)) kept.push_back(record);
  }
  report.after_count = kept.size();

  auto before = chapter_counts(records);
  auto after = chapter_counts(kept);
  std::vector<double> sizes, reductions;
  for (const auto& [chapter, count] : before) {
    std::uint64_t remaining = after.count(chapter) ? after[chapter] : 0;
    report.chapter_reduction[chapter] = {count, remaining};
    sizes.push_back(double(count));
    reductions.push_back(double(count - remaining));
  }
  if (sizes.size() >= 2) {
    try {
      report.pearson_r = pearson(sizes, reductions);
    } catch (const DegenerateInputError&) {
      report.pearson_r = std::nullopt;
    }
  }
  return {std::move(kept), std::move(report)};
}

std::string report_to_json(const DedupReport& report) {
  json chapters = json::object();
  for (const auto& [chapter, counts] : report.chapter_reduction) {
    chapters[std::string(1, chapter)] = {{"before", counts.first},
                                         {"after", counts.second}};
  }
  json decisions = json::array();
  for (const auto& d : report.decisions) {
    json item{{"kept", d.kept_id},
              {"removed", d.removed_id},
              {"rule", d.rule == RetentionRule::Ppl ? "ppl" : "length"},
              {"similarity", d.similarity}};
    if (d.ppl_kept) item["ppl_kept"] = *d.ppl_kept;
    if (d.ppl_removed) item["ppl_removed"] = *d.ppl_removed;
    decisions.push_back(std::move(item));
  }
  json j{{"before_count", report.before_count},
         {"after_count", report.after_count},
         {"decisions", decisions},
         {"chapter_reduction", chapters},
         {"threshold", report.threshold},
         {"ppl_margin", report.ppl_margin},
         {"similarity_definition", report.similarity_definition},
         {"client", report.client}};
  if (report.pearson_r) {
    j["pearson_r"] = *report.pearson_r;
  } else {
    j["pearson_r"] = nullptr;
  }
  return j.dump(2);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  Eigen::Map<const Eigen::VectorXd> vx(x.data(),
                                       static_cast<Eigen::Index>(x.size()));
  Eigen::Map<const Eigen::VectorXd> vy(y.data(),
                                       static_cast<Eigen::Index>(y.size()));
  return pearson(vx, vy);
}

}  // namespace icdpipe::dedup
