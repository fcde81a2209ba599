#pragma once

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "icdpipe/code.hpp"
#include "icdpipe/modelclient.hpp"

namespace icdpipe::judging {

struct CandidateModel {
  std::string name;
  std::shared_ptr<model::ModelClient> client;
};

/// Outcome of one judged matchup, from the challenger's point of view.
/// The challenger always sat at position A.
enum class Verdict { ChallengerWins, OpponentWins, Tie };

std::string to_string(Verdict v);

struct MatchupObservation {
  IcdCode probe_code;
  std::string challenger;
  std::string opponent;
  Verdict verdict = Verdict::Tie;
  std::string raw_judge_output;
};

/// How the judge's raw text was read: position A, position B, or neither.
enum class ParsedVerdict { A, B, Tie };

/// Ordered regex cascade over the judge output: a standalone/trailing
/// "A"/"B" token, then a leading lone "1"/"2", then the phrases
/// "response a/b is better". Anything else is a tie. Total, never throws.
ParsedVerdict parse_verdict(std::string_view raw);

struct PromptTemplates {
  /// {code} slot.
  std::string candidate;
  /// {code}, {response_a}, {response_b} slots.
  std::string judge;

  static const PromptTemplates& defaults();
};

/// Candidate prompt with the code substituted, plus the judge template with
/// the code substituted and the response slots left open.
std::pair<std::string, std::string> build_probe_prompts(
    const IcdCode& code, const PromptTemplates& templates = PromptTemplates::defaults());

/// Fill {response_a}/{response_b} in a judge prompt template.
std::string fill_judge_prompt(const std::string& judge_template,
                              const std::string& response_a,
                              const std::string& response_b);

enum class OrderPolicy { Fixed, BothOrders };

struct TournamentOptions {
  OrderPolicy order_policy = OrderPolicy::Fixed;
  std::size_t parallelism = 1;
  model::GenerationRequest generation;  // prompt filled per call
  PromptTemplates templates = PromptTemplates::defaults();
};

struct MatchupFailure {
  IcdCode probe_code;
  std::string challenger;
  std::string opponent;
  std::string error;
};

struct TournamentResult {
  std::vector<MatchupObservation> observations;
  std::vector<MatchupFailure> failures;
};

/// Run every unordered candidate pair against every probe code: both
/// candidates describe the code once (generations are shared across pairs),
/// the judge delivers one verdict per ordering. Transport failures are
/// collected per matchup; the tournament aborts only when more than half of
/// all matchups failed.
TournamentResult run_tournament(const std::vector<CandidateModel>& candidates,
                                const std::vector<IcdCode>& probes,
                                model::ModelClient& judge,
                                const TournamentOptions& options = {});

/// Pairwise win statistics. wins(i,j) counts victories of model i over
/// model j; ties is symmetric; totals(i,j) = wins(i,j)+wins(j,i)+ties(i,j).
struct WinRateMatrix {
  std::vector<std::string> models;
  Eigen::MatrixXi wins;
  Eigen::MatrixXi ties;
  Eigen::MatrixXi totals;

  Eigen::Index size() const { return static_cast<Eigen::Index>(models.size()); }
  Eigen::Index index_of(const std::string& name) const;  // -1 if unknown

  /// wins(i,j)/totals(i,j); nullopt when the pair was never matched.
  std::optional<double> rate(Eigen::Index i, Eigen::Index j) const;
};

/// Tally observations. The model list is the sorted set of names seen, or
/// the explicit list when given (observations naming unknown models raise
/// UnknownModelError).
WinRateMatrix build_win_matrix(
    const std::vector<MatchupObservation>& observations,
    std::optional<std::vector<std::string>> models = std::nullopt);

/// Directed comparison graph: edge (j -> i) iff model i beat model j at
/// least once; tie edges are undirected.
struct ComparisonGraph {
  std::vector<std::string> models;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> win_edges;  // (j,i)
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> tie_edges;
  bool strongly_connected = false;
};

ComparisonGraph comparison_graph(const WinRateMatrix& matrix);

/// JSONL persistence for observations and JSON for matrices.
std::string observation_to_json_line(const MatchupObservation& obs);
std::vector<MatchupObservation> read_observations_jsonl_file(
    const std::string& path);
void write_observations_jsonl_file(
    const std::string& path, const std::vector<MatchupObservation>& obs);
std::string win_matrix_to_json(const WinRateMatrix& matrix);
WinRateMatrix win_matrix_from_json(const std::string& text);
WinRateMatrix read_win_matrix_file(const std::string& path);
void write_win_matrix_file(const std::string& path,
                           const WinRateMatrix& matrix);

}  // namespace icdpipe::judging
