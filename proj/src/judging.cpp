#include "icdpipe/judging.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <regex>
#include <set>

#include <json.hpp>

#include "icdpipe/errors.hpp"
#include "icdpipe/graph.hpp"
#include "icdpipe/parallel.hpp"

namespace icdpipe::judging {

using nlohmann::json;

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::ChallengerWins:
      return "A";
    case Verdict::OpponentWins:
      return "B";
    case Verdict::Tie:
      return "tie";
  }
  return "tie";
}

namespace {

std::string replace_all(std::string text, std::string_view slot,
                        std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(slot, pos)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
    pos += value.size();
  }
  return text;
}

std::string strip_token_punctuation(std::string_view token) {
  static const std::string punct = "()[]{}<>\"'`.,:;!?*_-";
  std::size_t b = 0, e = token.size();
  while (b < e && punct.find(token[b]) != std::string::npos) ++b;
  while (e > b && punct.find(token[e - 1]) != std::string::npos) --e;
  return std::string(token.substr(b, e - b));
}

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() &&
           std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    std::size_t j = i;
    while (j < text.size() &&
           !std::isspace(static_cast<unsigned char>(text[j]))) {
      ++j;
    }
    if (j > i) tokens.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return tokens;
}

}  // namespace

ParsedVerdict parse_verdict(std::string_view raw) {
  auto tokens = split_tokens(raw);
  if (tokens.empty()) return ParsedVerdict::Tie;

  // 1. standalone or trailing "A"/"B" token (the instructed format)
  std::string last = strip_token_punctuation(tokens.back());
  if (last == "A") return ParsedVerdict::A;
  if (last == "B") return ParsedVerdict::B;

  // 2. a lone "1"/"2" at the start of the output
  std::string first = strip_token_punctuation(tokens.front());
  if (first == "1") return ParsedVerdict::A;
  if (first == "2") return ParsedVerdict::B;

  // 3. "response a/b is better", case-insensitive; earlier mention wins
  static const std::regex a_phrase(R"(response\s+a\s+is\s+better)",
                                   std::regex::icase);
  static const std::regex b_phrase(R"(response\s+b\s+is\s+better)",
                                   std::regex::icase);
  std::match_results<std::string_view::const_iterator> ma, mb;
  bool has_a = std::regex_search(raw.begin(), raw.end(), ma, a_phrase);
  bool has_b = std::regex_search(raw.begin(), raw.end(), mb, b_phrase);
  if (has_a && (!has_b || ma.position(0) <= mb.position(0))) {
    return ParsedVerdict::A;
  }
  if (has_b) return ParsedVerdict::B;

  return ParsedVerdict::Tie;
}

const PromptTemplates& PromptTemplates::defaults() {
  static const PromptTemplates templates{
      // candidate probe
      "Describe the medical condition denoted by the ICD-10-CM diagnosis "
      "code {code}. Name the diagnosis and summarize its key clinical "
      "features.",
      // judge
      "Two responses below each describe the medical condition denoted by "
      "the ICD-10-CM code {code}. Decide which response is more accurate "
      "and clinically specific for this exact code.\n\n"
      "Response A:\n{response_a}\n\n"
      "Response B:\n{response_b}\n\n"
      "Reply with a single letter, \"A\" or \"B\"."};
  return templates;
}

std::pair<std::string, std::string> build_probe_prompts(
    const IcdCode& code, const PromptTemplates& templates) {
  return {replace_all(templates.candidate, "{code}", code.value()),
          replace_all(templates.judge, "{code}", code.value())};
}

std::string fill_judge_prompt(const std::string& judge_template,
                              const std::string& response_a,
                              const std::string& response_b) {
  std::string out = replace_all(judge_template, "{response_a}", response_a);
  return replace_all(out, "{response_b}", response_b);
}

namespace {

struct JudgeTask {
  std::size_t challenger_index;  // sits at position A
  std::size_t opponent_index;    // sits at position B
  std::size_t probe_index;
};

}  // namespace

TournamentResult run_tournament(const std::vector<CandidateModel>& candidates,
                                const std::vector<IcdCode>& probes,
                                model::ModelClient& judge,
                                const TournamentOptions& options) {
  if (candidates.size() < 2) {
    throw ValidationError("tournament needs at least two candidates");
  }
  if (probes.empty()) {
    throw ValidationError("tournament needs at least one probe code");
  }
  {
    std::set<std::string> names;
    for (const auto& c : candidates) {
      if (!names.insert(c.name).second) {
        throw ValidationError("duplicate candidate name '" + c.name + "'");
      }
    }
  }

  const std::size_t k = candidates.size();
  const std::size_t p = probes.size();

  // Each candidate describes each probe once; generations are shared
  // across every pair the candidate plays.
  std::vector<std::optional<std::string>> generations(k * p);
  std::vector<std::optional<std::string>> generation_errors(k * p);
  parallel_for(k * p, std::max<std::size_t>(options.parallelism, 1),
               [&](std::size_t t) {
                 std::size_t c = t / p, q = t % p;
                 auto [candidate_prompt, judge_template] =
                     build_probe_prompts(probes[q], options.templates);
                 (void)judge_template;
                 model::GenerationRequest request = options.generation;
                 request.prompt = candidate_prompt;
                 try {
                   generations[t] = candidates[c].client->generate(request);
                 } catch (const Error& e) {
                   generation_errors[t] = e.what();
                 }
               });

  std::vector<JudgeTask> tasks;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      for (std::size_t q = 0; q < p; ++q) {
        tasks.push_back({i, j, q});
        if (options.order_policy == OrderPolicy::BothOrders) {
          tasks.push_back({j, i, q});
        }
      }
    }
  }

  std::vector<std::optional<MatchupObservation>> slots(tasks.size());
  std::vector<std::optional<MatchupFailure>> failures(tasks.size());
  parallel_for(tasks.size(), std::max<std::size_t>(options.parallelism, 1),
               [&](std::size_t t) {
                 const JudgeTask& task = tasks[t];
                 const auto& challenger = candidates[task.challenger_index];
                 const auto& opponent = candidates[task.opponent_index];
                 const IcdCode& probe = probes[task.probe_index];
                 auto fail = [&](const std::string& why) {
                   failures[t] = MatchupFailure{probe, challenger.name,
                                                opponent.name, why};
                 };
                 std::size_t ga = task.challenger_index * p + task.probe_index;
                 std::size_t gb = task.opponent_index * p + task.probe_index;
                 if (generation_errors[ga]) return fail(*generation_errors[ga]);
                 if (generation_errors[gb]) return fail(*generation_errors[gb]);
                 auto [candidate_prompt, judge_template] =
                     build_probe_prompts(probe, options.templates);
                 (void)candidate_prompt;
                 std::string prompt = fill_judge_prompt(
                     judge_template, *generations[ga], *generations[gb]);
                 model::GenerationRequest request = options.generation;
                 request.prompt = prompt;
                 std::string raw;
                 try {
                   raw = judge.generate(request);
                 } catch (const Error& e) {
                   return fail(e.what());
                 }
                 ParsedVerdict parsed = parse_verdict(raw);
                 Verdict verdict = parsed == ParsedVerdict::A
                                       ? Verdict::ChallengerWins
                                       : parsed == ParsedVerdict::B
                                             ? Verdict::OpponentWins
                                             : Verdict::Tie;
                 slots[t] = MatchupObservation{probe, challenger.name,
                                               opponent.name, verdict, raw};
               });

  TournamentResult result;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (slots[t]) result.observations.push_back(std::move(*slots[t]));
    if (failures[t]) result.failures.push_back(std::move(*failures[t]));
  }
  if (result.failures.size() * 2 > tasks.size()) {
    throw TransportError("tournament aborted: " +
                         std::to_string(result.failures.size()) + " of " +
                         std::to_string(tasks.size()) + " matchups failed");
  }
  return result;
}

Eigen::Index WinRateMatrix::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i] == name) return static_cast<Eigen::Index>(i);
  }
  return -1;
}

std::optional<double> WinRateMatrix::rate(Eigen::Index i,
                                          Eigen::Index j) const {
  if (totals(i, j) == 0) return std::nullopt;
  return double(wins(i, j)) / double(totals(i, j));
}

WinRateMatrix build_win_matrix(
    const std::vector<MatchupObservation>& observations,
    std::optional<std::vector<std::string>> models) {
  WinRateMatrix matrix;
  if (models) {
    matrix.models = std::move(*models);
  } else {
    std::set<std::string> names;
    for (const auto& obs : observations) {
      names.insert(obs.challenger);
      names.insert(obs.opponent);
    }
    matrix.models.assign(names.begin(), names.end());
  }
  const Eigen::Index k = matrix.size();
  matrix.wins = Eigen::MatrixXi::Zero(k, k);
  matrix.ties = Eigen::MatrixXi::Zero(k, k);
  matrix.totals = Eigen::MatrixXi::Zero(k, k);
  for (const auto& obs : observations) {
    Eigen::Index a = matrix.index_of(obs.challenger);
    Eigen::Index b = matrix.index_of(obs.opponent);
    if (a < 0 || b < 0) {
      throw UnknownModelError("observation references unknown model '" +
                              (a < 0 ? obs.challenger : obs.opponent) + "'");
    }
    if (a == b) {
      throw ValidationError("observation pits '" + obs.challenger +
                            "' against itself");
    }
    switch (obs.verdict) {
      case Verdict::ChallengerWins:
        matrix.wins(a, b) += 1;
        break;
      case Verdict::OpponentWins:
        matrix.wins(b, a) += 1;
        break;
      case Verdict::Tie:
        matrix.ties(a, b) += 1;
        matrix.ties(b, a) += 1;
        break;
    }
    matrix.totals(a, b) += 1;
    matrix.totals(b, a) += 1;
  }
  return matrix;
}

ComparisonGraph comparison_graph(const WinRateMatrix& matrix) {
  ComparisonGraph graph;
  graph.models = matrix.models;
  const Eigen::Index k = matrix.size();
  graph.win_edges.setConstant(k, k, false);
  graph.tie_edges.setConstant(k, k, false);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i == j) continue;
      if (matrix.wins(i, j) >= 1) graph.win_edges(j, i) = true;  // j -> i
      if (matrix.ties(i, j) >= 1) graph.tie_edges(i, j) = true;
    }
  }
  graph.strongly_connected = strongly_connected(
      static_cast<std::size_t>(k), [&](std::size_t from, std::size_t to) {
        return graph.win_edges(static_cast<Eigen::Index>(from),
                               static_cast<Eigen::Index>(to));
      });
  return graph;
}

std::string observation_to_json_line(const MatchupObservation& obs) {
  return json{{"probe", obs.probe_code.value()},
              {"challenger", obs.challenger},
              {"opponent", obs.opponent},
              {"verdict", to_string(obs.verdict)},
              {"raw", obs.raw_judge_output}}
      .dump();
}

std::vector<MatchupObservation> read_observations_jsonl_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<MatchupObservation> observations;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw IoError(path + " line " + std::to_string(line_no) +
                    ": invalid JSON");
    }
    auto code = IcdCode::parse(j.value("probe", ""));
    if (!code) {
      throw IoError(path + " line " + std::to_string(line_no) +
                    ": invalid probe code");
    }
    MatchupObservation obs;
    obs.probe_code = *code;
    obs.challenger = j.value("challenger", "");
    obs.opponent = j.value("opponent", "");
    std::string verdict = j.value("verdict", "tie");
    obs.verdict = verdict == "A"   ? Verdict::ChallengerWins
                  : verdict == "B" ? Verdict::OpponentWins
                                   : Verdict::Tie;
    obs.raw_judge_output = j.value("raw", "");
    observations.push_back(std::move(obs));
  }
  return observations;
}

void write_observations_jsonl_file(
    const std::string& path, const std::vector<MatchupObservation>& obs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& o : obs) out << observation_to_json_line(o) << '\n';
}

namespace {

json matrix_to_json_array(const Eigen::MatrixXi& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXi matrix_from_json_array(const json& rows, Eigen::Index k,
                                       const std::string& what) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != k) {
    throw IoError("win matrix field '" + what + "' has the wrong shape");
  }
  Eigen::MatrixXi m(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& row = rows[i];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != k) {
      throw IoError("win matrix field '" + what + "' has the wrong shape");
    }
    for (Eigen::Index j = 0; j < k; ++j) m(i, j) = row[j].get<int>();
  }
  return m;
}

}  // namespace

std::string win_matrix_to_json(const WinRateMatrix& matrix) {
  json j{{"models", matrix.models},
         {"wins", matrix_to_json_array(matrix.wins)},
         {"ties", matrix_to_json_array(matrix.ties)},
         {"totals", matrix_to_json_array(matrix.totals)}};
  return j.dump(2);
}

WinRateMatrix win_matrix_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("models")) {
    throw IoError("win matrix JSON must be an object with a models list");
  }
  WinRateMatrix matrix;
  matrix.models = j.at("models").get<std::vector<std::string>>();
  const Eigen::Index k = matrix.size();
  matrix.wins = matrix_from_json_array(j.at("wins"), k, "wins");
  matrix.ties = j.contains("ties")
                    ? matrix_from_json_array(j.at("ties"), k, "ties")
                    : Eigen::MatrixXi::Zero(k, k).eval();
  if (j.contains("totals")) {
    matrix.totals = matrix_from_json_array(j.at("totals"), k, "totals");
  } else {
    matrix.totals = matrix.wins + matrix.wins.transpose() + matrix.ties;
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j2 = 0; j2 < k; ++j2) {
      if (i == j2) continue;
      if (matrix.wins(i, j2) + matrix.wins(j2, i) + matrix.ties(i, j2) !=
          matrix.totals(i, j2)) {
        throw IoError("win matrix violates wins+ties=totals at (" +
                      std::to_string(i) + "," + std::to_string(j2) + ")");
      }
    }
  }
  return matrix;
}

WinRateMatrix read_win_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return win_matrix_from_json(text);
}

void write_win_matrix_file(const std::string& path,
                           const WinRateMatrix& matrix) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << win_matrix_to_json(matrix) << '\n';
}

}  // namespace icdpipe::judging
