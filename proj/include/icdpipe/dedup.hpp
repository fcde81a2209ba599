#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "icdpipe/errors.hpp"
#include "icdpipe/modelclient.hpp"
#include "icdpipe/record.hpp"

namespace icdpipe::dedup {

/// Similarity of two unit vectors at L2 distance d: cosine, i.e. 1 - d^2/2.
inline double similarity_from_l2(double l2_distance) {
  return 1.0 - l2_distance * l2_distance / 2.0;
}

struct NeighborHit {
  std::string query_id;
  std::string neighbor_id;
  double l2_distance = 0.0;
  double similarity = 0.0;
};

/// Nearest-neighbor-excluding-self queries over a fixed set of unit
/// vectors, addressed by dataset position.
class NearestNeighborIndex {
 public:
  struct Hit {
    Eigen::Index index;
    double l2_distance;
    double similarity;
  };

  virtual ~NearestNeighborIndex() = default;
  virtual std::optional<Hit> nearest(Eigen::Index query) const = 0;
  virtual Eigen::Index size() const = 0;
};

enum class IndexKind { Exact, Ann };

/// Exact search by default; the ANN backend is random-hyperplane LSH and is
/// expected to reach recall >= 0.99 above the configured similarity
/// threshold (checked against the shipped benchmark fixture in the tests).
std::unique_ptr<NearestNeighborIndex> build_index(
    const std::vector<model::EmbeddingVector>& vectors,
    IndexKind kind = IndexKind::Exact, std::uint64_t seed = 0);

/// One NeighborHit per record that has a neighbor, aligned with the input
/// order.
std::vector<NeighborHit> neighbor_hits(
    const std::vector<CodedRecord>& records,
    const std::vector<model::EmbeddingVector>& vectors,
    const NearestNeighborIndex* index = nullptr);

/// A redundancy candidate: ids in lexicographic order, similarity of the
/// nearest-neighbor hit that produced it.
struct CandidatePair {
  std::string low_id;
  std::string high_id;
  double similarity = 0.0;
};

/// Nearest neighbor of every record, filtered to pairs whose similarity
/// exceeds the threshold and whose code sets are identical; canonicalized
/// and de-duplicated.
std::vector<CandidatePair> find_redundant_pairs(
    const std::vector<CodedRecord>& records,
    const std::vector<model::EmbeddingVector>& vectors, double threshold,
    const NearestNeighborIndex* index = nullptr);

enum class RetentionRule { Ppl, Length };

struct DedupDecision {
  std::string kept_id;
  std::string removed_id;
  RetentionRule rule = RetentionRule::Ppl;
  std::optional<double> ppl_kept;
  std::optional<double> ppl_removed;
  double similarity = 0.0;
};

/// Keep the record whose perplexity is at least (1+margin) times the
/// other's; otherwise keep the longer text; exact length ties keep the
/// lexicographically smaller id.
DedupDecision resolve_pair(const CodedRecord& a, const CodedRecord& b,
                           double ppl_a, double ppl_b,
                           double ppl_margin = 0.05, double similarity = 0.0);

struct DedupReport {
  std::size_t before_count = 0;
  std::size_t after_count = 0;
  std::vector<DedupDecision> decisions;
  /// chapter -> (code occurrences before, after)
  std::map<char, std::pair<std::uint64_t, std::uint64_t>> chapter_reduction;
  /// correlation of chapter size with chapter reduction; absent when
  /// degenerate (fewer than two chapters or zero variance)
  std::optional<double> pearson_r;
  double threshold = 0.0;
  double ppl_margin = 0.0;
  std::string similarity_definition;
  std::string client;  // which model client produced embeddings and PPL
};

struct DedupOptions {
  double threshold = 0.9;
  double ppl_margin = 0.05;
  IndexKind index = IndexKind::Exact;
  std::uint64_t seed = 0;  // ANN hashing seed
  std::size_t parallelism = 1;
};

/// Full redundancy-aware pass: embed, pair, resolve, remove. Output order
/// preserves input order; the report carries every decision plus the
/// chapter-level before/after statistics.
std::pair<std::vector<CodedRecord>, DedupReport> deduplicate(
    const std::vector<CodedRecord>& records, model::ModelClient& client,
    const DedupOptions& options = {});

std::string report_to_json(const DedupReport& report);

/// Sample Pearson correlation. Throws AlignmentError on length mismatch and
/// DegenerateInputError on fewer than two points or zero variance.
template <typename DerivedX, typename DerivedY>
double pearson(const Eigen::MatrixBase<DerivedX>& x,
               const Eigen::MatrixBase<DerivedY>& y) {
  if (x.size() != y.size()) {
    throw AlignmentError("pearson: length mismatch");
  }
  if (x.size() < 2) {
    throw DegenerateInputError("pearson: need at least two points");
  }
  const double mx = x.template cast<double>().mean();
  const double my = y.template cast<double>().mean();
  const auto dx = x.template cast<double>().array() - mx;
  const auto dy = y.template cast<double>().array() - my;
  const double sxx = (dx * dx).sum();
  const double syy = (dy * dy).sum();
  if (sxx <= 0.0 || syy <= 0.0) {
    throw DegenerateInputError("pearson: zero variance");
  }
  return (dx * dy).sum() / std::sqrt(sxx * syy);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace icdpipe::dedup
