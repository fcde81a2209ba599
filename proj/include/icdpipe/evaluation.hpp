#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "icdpipe/code.hpp"
#include "icdpipe/corpus.hpp"
#include "icdpipe/prompting.hpp"
#include "icdpipe/record.hpp"

namespace icdpipe::evaluation {

/// Full-code evaluation or restriction to a top-K code set.
struct Scope {
  enum class Kind { Full, TopK };

  Kind kind = Kind::Full;
  std::set<IcdCode> codes;  // TopK only, non-empty

  static Scope full();
  static Scope top_k(std::set<IcdCode> codes);
  std::string describe() const;
};

/// Full scope is the identity; TopK intersects with the top-K set.
std::set<IcdCode> scope_codes(const std::set<IcdCode>& codes,
                              const Scope& scope);

/// Gold records aligned one-to-one with parsed predictions.
struct ScoredRun {
  std::vector<std::pair<CodedRecord, prompting::PredictionCodes>> pairs;
  Scope scope;
};

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double mdca = 0.0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::size_t n_records = 0;
  std::string scope;
  bool zero_denominator = false;  // some ratio fell back to 0
};

/// Micro-averaged precision/recall/F1 over the scoped code sets (gold and
/// predicted sets both include the main code). Zero denominators score 0.
MetricsReport micro_prf(const ScoredRun& run);

/// Fraction of records whose predicted main code exactly matches gold.
/// Ignores scope: an exact match outside the top-K set still counts.
double mdca(const ScoredRun& run);

struct EvaluateOptions {
  std::size_t top_k = 50;
  bool allow_missing = false;  // score absent predictions as empty sets
};

/// Full-scope and top-K reports (top-K codes drawn from the designated
/// frequency source, normally the training corpus). Throws
/// MissingPredictionError for unmatched gold ids unless allow_missing.
std::vector<MetricsReport> evaluate(
    const std::vector<CodedRecord>& gold,
    const std::map<std::string, prompting::PredictionCodes>& predictions,
    const corpus::CodeFrequencyTable& frequency_source,
    const EvaluateOptions& options = {});

std::string reports_to_json(const std::vector<MetricsReport>& reports);

}  // namespace icdpipe::evaluation
