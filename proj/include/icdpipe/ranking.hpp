#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "icdpipe/errors.hpp"
#include "icdpipe/graph.hpp"
#include "icdpipe/judging.hpp"

namespace icdpipe::ranking {

/// Strength estimate for a model set. pi is the stationary distribution
/// (strictly positive, summing to 1); logits are ln(pi) recentered to mean
/// zero.
struct RankingResult {
  std::vector<std::string> models;
  Eigen::VectorXd pi;
  Eigen::VectorXd logits;
  int iterations = 0;
  bool converged = false;
};

/// Stationary distribution of a continuous-time Markov chain with rate
/// matrix `rates` (row = from, column = to, zero diagonal). Solves the
/// global balance equations with the normalization sum(pi)=1 replacing one
/// balance row; falls back to power iteration on the uniformized chain if
/// the direct solve is unreliable. The rate matrix is normalized by its
/// largest entry first, so the result is exactly invariant under uniform
/// rescaling.
///
/// Throws NotIrreducibleError when the positive-rate digraph is not
/// strongly connected, NumericalError when no solution meets the residual
/// bound.
template <typename Derived>
Eigen::Vector<typename Derived::Scalar, Eigen::Dynamic> stationary_distribution(
    const Eigen::MatrixBase<Derived>& rates) {
  using Scalar = typename Derived::Scalar;
  using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  const Eigen::Index k = rates.rows();
  if (k == 0) throw EmptyInputError("stationary_distribution: empty matrix");
  if (rates.cols() != k) {
    throw ValidationError("stationary_distribution: matrix must be square");
  }
  Matrix lambda = rates;
  for (Eigen::Index i = 0; i < k; ++i) {
    lambda(i, i) = Scalar(0);
    for (Eigen::Index j = 0; j < k; ++j) {
      if (lambda(i, j) < Scalar(0)) {
        throw ValidationError("stationary_distribution: negative rate");
      }
    }
  }
  if (k == 1) return Vector::Ones(1);

  if (!strongly_connected(static_cast<std::size_t>(k),
                          [&](std::size_t a, std::size_t b) {
                            return lambda(static_cast<Eigen::Index>(a),
                                          static_cast<Eigen::Index>(b)) >
                                   Scalar(0);
                          })) {
    throw NotIrreducibleError(
        "rate graph is not strongly connected; no unique stationary "
        "distribution");
  }

  const Scalar scale = lambda.maxCoeff();
  lambda /= scale;  // rescaling leaves pi unchanged; solve at unit scale

  Matrix generator = lambda;
  for (Eigen::Index i = 0; i < k; ++i) {
    generator(i, i) = -lambda.row(i).sum();
  }

  const Scalar residual_tol =
      std::max(Scalar(1e-10),
               std::numeric_limits<Scalar>::epsilon() * Scalar(1e5));
  auto residual = [&](const Vector& pi) {
    return (generator.transpose() * pi).template lpNorm<Eigen::Infinity>();
  };
  auto cleaned = [&](Vector pi) {
    for (Eigen::Index i = 0; i < k; ++i) pi[i] = std::max(pi[i], Scalar(0));
    Scalar sum = pi.sum();
    if (sum <= Scalar(0)) return Vector();
    pi /= sum;
    return pi;
  };

  // direct solve: balance rows with the last replaced by normalization
  Matrix system = generator.transpose();
  system.row(k - 1).setOnes();
  Vector rhs = Vector::Zero(k);
  rhs[k - 1] = Scalar(1);
  Vector pi = cleaned(system.fullPivLu().solve(rhs));
  if (pi.size() == k && residual(pi) <= residual_tol) return pi;

  // power iteration on the uniformized chain P = I + Q/gamma
  Scalar gamma = Scalar(0);
  for (Eigen::Index i = 0; i < k; ++i) {
    gamma = std::max(gamma, -generator(i, i));
  }
  gamma *= Scalar(1.05);
  Matrix transition = Matrix::Identity(k, k) + generator / gamma;
  Vector current = Vector::Constant(k, Scalar(1) / Scalar(k));
  for (int iter = 0; iter < 200000; ++iter) {
    Vector next = transition.transpose() * current;
    next /= next.sum();
    Scalar delta = (next - current).template lpNorm<Eigen::Infinity>();
    current = next;
    if (delta < std::numeric_limits<Scalar>::epsilon() * Scalar(16)) break;
  }
  pi = cleaned(current);
  if (pi.size() == k && residual(pi) <= residual_tol) return pi;
  throw NumericalError(
      "stationary_distribution: no solution within residual tolerance");
}

enum class TiePolicy { Half, Discard };

struct IlsrOptions {
  TiePolicy tie_policy = TiePolicy::Half;
  double tol = 1e-9;      // L-infinity change between iterations
  int max_iter = 100;
  double dampen = 0.0;    // added to every off-diagonal rate when > 0
};

/// One-shot Luce spectral ranking: the win-rate matrix is used directly as
/// the transition-rate matrix (rate of j losing to i drives flow j -> i;
/// cells that were never contested contribute zero).
RankingResult lsr_rank(const judging::WinRateMatrix& matrix,
                       double dampen = 0.0);

/// Iterative Luce spectral ranking over win counts: each round rebuilds the
/// rates as lambda(j,i) = sum over matchups i won against j of
/// 1/(pi_i + pi_j) and re-solves, converging to the maximum-likelihood
/// Plackett-Luce strengths. Ties enter per the tie policy (Half adds
/// 0.5/(pi_i+pi_j) in both directions; Discard drops them).
RankingResult ilsr_rank(const judging::WinRateMatrix& matrix,
                        const IlsrOptions& options = {});

/// Same iteration over an explicit (possibly fractional) win-weight matrix;
/// weights(i,j) is the total weight of i beating j.
RankingResult ilsr_rank_weights(std::vector<std::string> models,
                                const Eigen::MatrixXd& weights,
                                const IlsrOptions& options = {});

/// pi renormalized over a non-empty alternative subset.
std::map<std::string, double> selection_probability(
    const RankingResult& result, const std::vector<std::string>& alternatives);

/// Build a RankingResult directly from strength logits (softmax).
RankingResult ranking_from_logits(std::vector<std::string> models,
                                  const Eigen::VectorXd& logits);

struct RankEntry {
  std::string name;
  double pi = 0.0;
  double logit = 0.0;
  bool tied_with_previous = false;  // pi gap below 1e-6
};

struct RankReport {
  std::vector<RankEntry> entries;  // pi descending
  std::string selected;            // highest stationary probability
};

RankReport rank_report(const RankingResult& result);

}  // namespace icdpipe::ranking
