#include "icdpipe/ranking.hpp"

#include <algorithm>
#include <numeric>

namespace icdpipe::ranking {

namespace {

RankingResult package(std::vector<std::string> models, Eigen::VectorXd pi,
                      int iterations, bool converged) {
  pi /= pi.sum();
  Eigen::VectorXd logits(pi.size());
  for (Eigen::Index i = 0; i < pi.size(); ++i) logits[i] = std::log(pi[i]);
  logits.array() -= logits.mean();
  RankingResult result;
  result.models = std::move(models);
  result.pi = std::move(pi);
  result.logits = std::move(logits);
  result.iterations = iterations;
  result.converged = converged;
  return result;
}

void check_irreducible_weights(const Eigen::MatrixXd& weights, double dampen) {
  const Eigen::Index k = weights.rows();
  if (dampen > 0.0) return;  // dampening makes every off-diagonal positive
  bool ok = strongly_connected(
      static_cast<std::size_t>(k), [&](std::size_t from, std::size_t to) {
        // flow j -> i exists iff i ever beat j
        return weights(static_cast<Eigen::Index>(to),
                       static_cast<Eigen::Index>(from)) > 0.0;
      });
  if (!ok) {
    throw NotIrreducibleError(
        "win graph is not strongly connected; use --dampen for an "
        "exploratory estimate");
  }
}

Eigen::MatrixXd win_weights(const judging::WinRateMatrix& matrix,
                            TiePolicy policy) {
  Eigen::MatrixXd weights = matrix.wins.cast<double>();
  if (policy == TiePolicy::Half) {
    weights += 0.5 * matrix.ties.cast<double>();
  }
  weights.diagonal().setZero();
  return weights;
}

}  // namespace

RankingResult lsr_rank(const judging::WinRateMatrix& matrix, double dampen) {
  const Eigen::Index k = matrix.size();
  if (k == 0) throw EmptyInputError("lsr_rank: no models");
  if (k == 1) {
    return package(matrix.models, Eigen::VectorXd::Ones(1), 1, true);
  }
  Eigen::MatrixXd rates = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i == j) continue;
      auto r = matrix.rate(i, j);
      rates(j, i) = (r ? *r : 0.0) + dampen;  // j -> i at the rate i beats j
    }
  }
  return package(matrix.models, stationary_distribution(rates), 1, true);
}

RankingResult ilsr_rank(const judging::WinRateMatrix& matrix,
                        const IlsrOptions& options) {
  return ilsr_rank_weights(matrix.models,
                           win_weights(matrix, options.tie_policy), options);
}

RankingResult ilsr_rank_weights(std::vector<std::string> models,
                                const Eigen::MatrixXd& weights,
                                const IlsrOptions& options) {
  const Eigen::Index k = weights.rows();
  if (k == 0 || models.empty()) throw EmptyInputError("ilsr_rank: no models");
  if (static_cast<Eigen::Index>(models.size()) != k ||
      weights.cols() != k) {
    throw ValidationError("ilsr_rank: model list and weights disagree");
  }
  if (k == 1) {
    return package(std::move(models), Eigen::VectorXd::Ones(1), 1, true);
  }
  if ((weights.array() < 0.0).any()) {
    throw ValidationError("ilsr_rank: negative win weight");
  }
  check_irreducible_weights(weights, options.dampen);

  Eigen::VectorXd pi = Eigen::VectorXd::Constant(k, 1.0 / double(k));
  int iterations = 0;
  bool converged = false;
  while (iterations < options.max_iter) {
    ++iterations;
    Eigen::MatrixXd rates = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        if (i == j) continue;
        double w = weights(i, j);
        if (w > 0.0) rates(j, i) = w / (pi[i] + pi[j]);
        rates(j, i) += options.dampen;
      }
    }
    Eigen::VectorXd next = stationary_distribution(rates);
    double delta = (next - pi).lpNorm<Eigen::Infinity>();
    pi = next;
    if (delta < options.tol) {
      converged = true;
      break;
    }
  }
  return package(std::move(models), std::move(pi), iterations, converged);
}

std::map<std::string, double> selection_probability(
    const RankingResult& result,
    const std::vector<std::string>& alternatives) {
  if (alternatives.empty()) {
    throw EmptyInputError("selection_probability: empty alternative set");
  }
  std::map<std::string, double> strengths;
  double sum = 0.0;
  for (const auto& name : alternatives) {
    if (strengths.count(name)) continue;  // repeated alternative
    auto it = std::find(result.models.begin(), result.models.end(), name);
    if (it == result.models.end()) {
      throw UnknownModelError("unknown model '" + name + "'");
    }
    double s = result.pi[it - result.models.begin()];
    strengths[name] = s;
    sum += s;
  }
  for (auto& [name, s] : strengths) s /= sum;
  return strengths;
}

RankingResult ranking_from_logits(std::vector<std::string> models,
                                  const Eigen::VectorXd& logits) {
  if (models.empty() ||
      static_cast<Eigen::Index>(models.size()) != logits.size()) {
    throw ValidationError("ranking_from_logits: model/logit length mismatch");
  }
  Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
  Eigen::VectorXd pi = shifted.array().exp();
  return package(std::move(models), std::move(pi), 0, true);
}

RankReport rank_report(const RankingResult& result) {
  std::vector<std::size_t> order(result.models.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (result.pi[a] != result.pi[b]) return result.pi[a] > result.pi[b];
    return result.models[a] < result.models[b];
  });
  RankReport report;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    std::size_t i = order[rank];
    RankEntry entry;
    entry.name = result.models[i];
    entry.pi = result.pi[i];
    entry.logit = result.logits[i];
    entry.tied_with_previous =
        rank > 0 && std::abs(result.pi[order[rank - 1]] - result.pi[i]) < 1e-6;
    report.entries.push_back(std::move(entry));
  }
  if (!report.entries.empty()) report.selected = report.entries.front().name;
  return report;
}

}  // namespace icdpipe::ranking
