#include "icdpipe/evaluation.hpp"

#include <algorithm>

#include <json.hpp>

#include "icdpipe/errors.hpp"

namespace icdpipe::evaluation {

using nlohmann::json;

Scope Scope::full() { return Scope{Kind::Full, {}}; }

Scope Scope::top_k(std::set<IcdCode> codes) {
  if (codes.empty()) {
    throw ValidationError("top-K scope needs a non-empty code set");
  }
  return Scope{Kind::TopK, std::move(codes)};
}

std::string Scope::describe() const {
  if (kind == Kind::Full) return "full";
  return "top-" + std::to_string(codes.size());
}

std::set<IcdCode> scope_codes(const std::set<IcdCode>& codes,
                              const Scope& scope) {
  if (scope.kind == Scope::Kind::Full) return codes;
  std::set<IcdCode> out;
  std::set_intersection(codes.begin(), codes.end(), scope.codes.begin(),
                        scope.codes.end(), std::inserter(out, out.begin()));
  return out;
}

namespace {

std::set<IcdCode> predicted_set(const prompting::PredictionCodes& pred) {
  std::set<IcdCode> codes(pred.other_codes.begin(), pred.other_codes.end());
  if (pred.main_code) codes.insert(*pred.main_code);
  return codes;
}

}  // namespace

MetricsReport micro_prf(const ScoredRun& run) {
  MetricsReport report;
  report.scope = run.scope.describe();
  report.n_records = run.pairs.size();
  for (const auto& [gold, pred] : run.pairs) {
    std::set<IcdCode> gold_codes = scope_codes(gold.code_set(), run.scope);
    std::set<IcdCode> pred_codes = scope_codes(predicted_set(pred), run.scope);
    for (const auto& code : pred_codes) {
      if (gold_codes.count(code)) {
        ++report.tp;
      } else {
        ++report.fp;
      }
    }
    for (const auto& code : gold_codes) {
      if (!pred_codes.count(code)) ++report.fn;
    }
  }
  std::uint64_t pred_total = report.tp + report.fp;
  std::uint64_t gold_total = report.tp + report.fn;
  if (pred_total == 0 || gold_total == 0) report.zero_denominator = true;
  report.precision =
      pred_total == 0 ? 0.0 : double(report.tp) / double(pred_total);
  report.recall =
      gold_total == 0 ? 0.0 : double(report.tp) / double(gold_total);
  report.f1 = report.precision + report.recall > 0.0
                  ? 2.0 * report.precision * report.recall /
                        (report.precision + report.recall)
                  : 0.0;
  report.mdca = mdca(run);
  return report;
}

double mdca(const ScoredRun& run) {
  if (run.pairs.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& [gold, pred] : run.pairs) {
    if (pred.main_code && *pred.main_code == gold.main_code) ++correct;
  }
  return double(correct) / double(run.pairs.size());
}

std::vector<MetricsReport> evaluate(
    const std::vector<CodedRecord>& gold,
    const std::map<std::string, prompting::PredictionCodes>& predictions,
    const corpus::CodeFrequencyTable& frequency_source,
    const EvaluateOptions& options) {
  if (options.top_k == 0) {
    throw ValidationError("top_k must be positive");
  }
  ScoredRun run;
  run.scope = Scope::full();
  std::set<std::string> seen_ids;
  for (const auto& record : gold) {
    if (!seen_ids.insert(record.id).second) {
      throw AlignmentError("duplicate gold record id '" + record.id + "'");
    }
    auto it = predictions.find(record.id);
    if (it == predictions.end()) {
      if (!options.allow_missing) {
        throw MissingPredictionError(
            record.id, "no prediction for record '" + record.id + "'");
      }
      prompting::PredictionCodes empty;
      empty.parse_warnings.push_back("missing prediction");
      run.pairs.emplace_back(record, std::move(empty));
    } else {
      run.pairs.emplace_back(record, it->second);
    }
  }

  std::vector<MetricsReport> reports;
  reports.push_back(micro_prf(run));

  auto top = frequency_source.top_k(options.top_k);
  run.scope = Scope::top_k(std::set<IcdCode>(top.begin(), top.end()));
  reports.push_back(micro_prf(run));
  return reports;
}

std::string reports_to_json(const std::vector<MetricsReport>& reports) {
  json out = json::array();
  for (const auto& r : reports) {
    json entry{{"scope", r.scope},
               {"precision", r.precision},
               {"recall", r.recall},
               {"f1", r.f1},
               {"mdca", r.mdca},
               {"tp", r.tp},
               {"fp", r.fp},
               {"fn", r.fn},
               {"n_records", r.n_records},
               {"zero_denominator", r.zero_denominator},
               {"mdca_note", "MDCA is exact-match on the main code and "
                             "ignores the scope restriction"}};
    if (r.scope != "full") {
      entry["scope_note"] =
          "gold and predicted sets are both restricted to the top-K codes";
    }
    out.push_back(std::move(entry));
  }
  return out.dump(2);
}

}  // namespace icdpipe::evaluation
