// icdpipe: ICD-10-CM coding pipeline driver.
//
// Subcommands move data between pipeline stages through JSONL/JSON files:
//   clean  -> validated, normalized corpus + rejection log
//   split  -> stratified train/dev/test partition
//   dedup  -> redundancy-aware reduced corpus + report
//   judge  -> pairwise LLM-as-judge observations + win matrix
//   rank   -> Plackett-Luce strengths from a matrix or observations
//   prompt -> instruction prompts + targets
//   eval   -> micro P/R/F at full and top-K scope, plus MDCA
//
// Every output gets a <name>.manifest.json sidecar recording config and
// input hashes, the seed, and the tool version.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "icdpipe/corpus.hpp"
#include "icdpipe/corpus_io.hpp"
#include "icdpipe/dedup.hpp"
#include "icdpipe/errors.hpp"
#include "icdpipe/evaluation.hpp"
#include "icdpipe/judging.hpp"
#include "icdpipe/manifest.hpp"
#include "icdpipe/modelclient.hpp"
#include "icdpipe/prompting.hpp"
#include "icdpipe/ranking.hpp"
#include "icdpipe/textnorm.hpp"
#include "icdpipe/version.hpp"

namespace {

using json = nlohmann::json;
using namespace icdpipe;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitTransport = 2;

struct PipelineConfig {
  model::ClientConfig client;
  SplitRatios ratios;
  std::optional<std::vector<std::string>> strip_rules;  // null = defaults
  double dedup_threshold = 0.9;
  double ppl_margin = 0.05;
  std::string dedup_index = "exact";
  int prompt_budget = 2048;
  std::optional<std::string> prompt_instruction;
  std::size_t probe_count = 50;
  std::size_t top_k = 50;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  int judge_max_tokens = 256;
  double judge_temperature = 0.0;
  std::optional<std::string> candidate_prompt;
  std::optional<std::string> judge_prompt;

  json effective;  // what was actually loaded, for the manifest hash

  void validate() const {
    ratios.validate();
    if (!(dedup_threshold > 0.0 && dedup_threshold < 1.0)) {
      throw ValidationError("dedup.threshold must lie in (0,1)");
    }
    if (ppl_margin < 0.0) {
      throw ValidationError("dedup.ppl_margin must be >= 0");
    }
    if (dedup_index != "exact" && dedup_index != "ann") {
      throw ValidationError("dedup.index must be 'exact' or 'ann'");
    }
    if (prompt_budget < 64) {
      throw ValidationError("prompt.budget must be at least 64");
    }
    if (top_k == 0) throw ValidationError("eval.top_k must be positive");
    if (probe_count == 0) {
      throw ValidationError("judge.probes must be positive");
    }
  }
};

model::ClientConfig client_from_json(const json& j,
                                     const model::ClientConfig& base) {
  model::ClientConfig c = base;
  if (!j.is_object()) return c;
  c.kind = j.value("kind", c.kind);
  c.seed = j.value("seed", c.seed);
  c.embed_dim = j.value("embed_dim", static_cast<long>(c.embed_dim));
  c.http.base_url = j.value("endpoint", c.http.base_url);
  c.http.embed_base_url = j.value("embed_endpoint", c.http.embed_base_url);
  c.http.completions_path =
      j.value("completions_path", c.http.completions_path);
  c.http.embeddings_path = j.value("embeddings_path", c.http.embeddings_path);
  c.http.timeout_seconds = j.value("timeout_seconds", c.http.timeout_seconds);
  c.http.retries = j.value("retries", c.http.retries);
  c.http.embed_dim = c.embed_dim;
  return c;
}

PipelineConfig load_config(const std::string& path) {
  PipelineConfig config;
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path);
    j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw ValidationError("config file " + path + " is not a JSON object");
    }
  }
  config.client = client_from_json(j.value("client", json::object()),
                                   model::ClientConfig{});
  if (j.contains("clean") && j["clean"].contains("strip_rules") &&
      j["clean"]["strip_rules"].is_array()) {
    config.strip_rules =
        j["clean"]["strip_rules"].get<std::vector<std::string>>();
  }
  if (j.contains("split")) {
    const auto& s = j["split"];
    config.ratios.train = s.value("train", config.ratios.train);
    config.ratios.dev = s.value("dev", config.ratios.dev);
    config.ratios.test = s.value("test", config.ratios.test);
  }
  if (j.contains("dedup")) {
    const auto& d = j["dedup"];
    config.dedup_threshold = d.value("threshold", config.dedup_threshold);
    config.ppl_margin = d.value("ppl_margin", config.ppl_margin);
    config.dedup_index = d.value("index", config.dedup_index);
  }
  if (j.contains("prompt")) {
    const auto& p = j["prompt"];
    config.prompt_budget = p.value("budget", config.prompt_budget);
    if (p.contains("instruction") && p["instruction"].is_string()) {
      config.prompt_instruction = p["instruction"].get<std::string>();
    }
  }
  if (j.contains("judge")) {
    const auto& g = j["judge"];
    config.probe_count = g.value("probes", config.probe_count);
    config.judge_max_tokens = g.value("max_tokens", config.judge_max_tokens);
    config.judge_temperature =
        g.value("temperature", config.judge_temperature);
    if (g.contains("candidate_prompt") && g["candidate_prompt"].is_string()) {
      config.candidate_prompt = g["candidate_prompt"].get<std::string>();
    }
    if (g.contains("judge_prompt") && g["judge_prompt"].is_string()) {
      config.judge_prompt = g["judge_prompt"].get<std::string>();
    }
  }
  if (j.contains("eval")) {
    config.top_k = j["eval"].value("top_k", config.top_k);
  }
  config.seed = j.value("seed", config.seed);
  config.parallelism = j.value("parallelism", config.parallelism);
  config.effective = std::move(j);
  return config;
}

RunManifest make_manifest(const std::string& command,
                          const PipelineConfig& config,
                          const std::vector<std::string>& inputs) {
  RunManifest manifest;
  manifest.command = command;
  manifest.config_hash = hash_bytes(config.effective.dump());
  for (const auto& path : inputs) {
    manifest.input_hashes[path] = hash_file(path);
  }
  manifest.tool_version = kVersion;
  manifest.timestamp_utc = utc_timestamp();
  manifest.seeds["seed"] = config.seed;
  manifest.seeds["client_seed"] = config.client.seed;
  return manifest;
}

void require_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("input file does not exist: " + path);
}

// ---------------------------------------------------------------- clean --

int run_clean(const PipelineConfig& config, const std::string& in_path,
              const std::string& out_path, const std::string& rejects_path,
              const std::string& code_table_path) {
  require_file(in_path);
  std::optional<CodeTable> table;
  if (!code_table_path.empty()) {
    require_file(code_table_path);
    std::ifstream in(code_table_path);
    std::set<std::string> codes;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) codes.insert(line);
    }
    table = CodeTable::from_codes(codes);
  }
  auto raw = corpus::read_raw_jsonl_file(in_path);
  corpus::CleanOptions options;
  options.code_table = table ? &*table : nullptr;
  options.parallelism = config.parallelism;
  if (config.strip_rules) {
    options.strip_rules = *config.strip_rules;
    options.use_default_strip_rules = false;
  }
  auto result = corpus::clean_corpus(raw, options);
  corpus::write_records_jsonl_file(out_path, result.records);
  if (!rejects_path.empty()) {
    corpus::write_rejections_jsonl_file(rejects_path, result.rejections);
  }
  auto manifest = make_manifest("clean", config, {in_path});
  write_manifest(manifest, out_path);
  std::cout << "clean: kept " << result.records.size() << ", rejected "
            << result.rejections.size() << ", warnings "
            << result.warnings.size() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- split --

int run_split(const PipelineConfig& config, const std::string& in_path,
              const std::string& out_dir) {
  require_file(in_path);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  auto records = corpus::read_records_jsonl_file(in_path);
  auto split = corpus::stratified_split(records, config.ratios, config.seed);
  corpus::write_records_jsonl_file(out_dir + "/train.jsonl", split.train);
  corpus::write_records_jsonl_file(out_dir + "/dev.jsonl", split.dev);
  corpus::write_records_jsonl_file(out_dir + "/test.jsonl", split.test);
  json split_manifest{
      {"seed", config.seed},
      {"ratios",
       {{"train", config.ratios.train},
        {"dev", config.ratios.dev},
        {"test", config.ratios.test}}},
      {"counts",
       {{"train", split.train.size()},
        {"dev", split.dev.size()},
        {"test", split.test.size()}}},
      {"total", records.size()}};
  write_file_atomic(out_dir + "/split.json", split_manifest.dump(2) + "\n");
  auto manifest = make_manifest("split", config, {in_path});
  write_manifest(manifest, out_dir + "/split.json");
  std::cout << "split: train " << split.train.size() << ", dev "
            << split.dev.size() << ", test " << split.test.size() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- dedup --

int run_dedup(const PipelineConfig& config, const std::string& in_path,
              const std::string& out_path, const std::string& report_path) {
  require_file(in_path);
  auto records = corpus::read_records_jsonl_file(in_path);
  auto client = model::make_client(config.client);
  dedup::DedupOptions options;
  options.threshold = config.dedup_threshold;
  options.ppl_margin = config.ppl_margin;
  options.index = config.dedup_index == "ann" ? dedup::IndexKind::Ann
                                              : dedup::IndexKind::Exact;
  options.seed = config.seed;
  options.parallelism = config.parallelism;
  auto [kept, report] = dedup::deduplicate(records, *client, options);
  corpus::write_records_jsonl_file(out_path, kept);
  write_file_atomic(report_path, dedup::report_to_json(report) + "\n");
  auto manifest = make_manifest("dedup", config, {in_path});
  write_manifest(manifest, out_path);
  std::cout << "dedup: " << report.before_count << " -> "
            << report.after_count << " (" << report.decisions.size()
            << " removals)\n";
  return kExitOk;
}

// ---------------------------------------------------------------- judge --

std::vector<IcdCode> load_probes(const std::string& probes_file,
                                 const std::string& probes_from,
                                 std::size_t probe_count) {
  std::vector<IcdCode> probes;
  if (!probes_file.empty()) {
    require_file(probes_file);
    std::ifstream in(probes_file);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto code = IcdCode::parse(line);
      if (!code) {
        throw ValidationError(probes_file + " line " +
                              std::to_string(line_no) +
                              ": invalid code '" + line + "'");
      }
      probes.push_back(*code);
    }
  } else if (!probes_from.empty()) {
    require_file(probes_from);
    auto records = corpus::read_records_jsonl_file(probes_from);
    probes = corpus::code_frequency(records).top_k(probe_count);
  } else {
    throw ValidationError("judge needs --probes-file or --probes-from");
  }
  if (probes.empty()) throw ValidationError("probe set is empty");
  return probes;
}

int run_judge(const PipelineConfig& config,
              const std::string& candidates_path,
              const std::string& probes_file, const std::string& probes_from,
              const std::string& judge_endpoint, const std::string& out_path,
              const std::string& matrix_path,
              const std::string& order_policy) {
  require_file(candidates_path);
  std::ifstream in(candidates_path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("candidates")) {
    throw ValidationError(candidates_path +
                          " must be a JSON object with a candidates list");
  }
  std::vector<judging::CandidateModel> candidates;
  for (const auto& c : j["candidates"]) {
    judging::CandidateModel candidate;
    candidate.name = c.value("name", "");
    if (candidate.name.empty()) {
      throw ValidationError("candidate without a name in " + candidates_path);
    }
    candidate.client =
        model::make_client(client_from_json(c, config.client));
    candidates.push_back(std::move(candidate));
  }
  model::ClientConfig judge_config =
      client_from_json(j.value("judge", json::object()), config.client);
  if (!judge_endpoint.empty()) {
    judge_config.kind = "http";
    judge_config.http.base_url = judge_endpoint;
  }
  auto judge_client = model::make_client(judge_config);

  auto probes = load_probes(probes_file, probes_from, config.probe_count);

  judging::TournamentOptions options;
  options.order_policy = order_policy == "both"
                             ? judging::OrderPolicy::BothOrders
                             : judging::OrderPolicy::Fixed;
  options.parallelism = config.parallelism;
  options.generation.max_tokens = config.judge_max_tokens;
  options.generation.temperature = config.judge_temperature;
  if (config.candidate_prompt) {
    options.templates.candidate = *config.candidate_prompt;
  }
  if (config.judge_prompt) options.templates.judge = *config.judge_prompt;

  auto result =
      judging::run_tournament(candidates, probes, *judge_client, options);
  judging::write_observations_jsonl_file(out_path, result.observations);
  auto matrix = judging::build_win_matrix(result.observations);
  judging::write_win_matrix_file(matrix_path, matrix);
  std::vector<std::string> inputs{candidates_path};
  if (!probes_file.empty()) inputs.push_back(probes_file);
  if (!probes_from.empty()) inputs.push_back(probes_from);
  auto manifest = make_manifest("judge", config, inputs);
  write_manifest(manifest, out_path);
  write_manifest(manifest, matrix_path);
  std::cout << "judge: " << result.observations.size() << " observations, "
            << result.failures.size() << " failures\n";
  return kExitOk;
}

// ----------------------------------------------------------------- rank --

json ranking_to_json(const ranking::RankingResult& result) {
  auto report = ranking::rank_report(result);
  json pi = json::array(), logits = json::array();
  for (Eigen::Index i = 0; i < result.pi.size(); ++i) {
    pi.push_back(result.pi[i]);
    logits.push_back(result.logits[i]);
  }
  return json{{"models", result.models}, {"pi", pi},
              {"logits", logits},        {"converged", result.converged},
              {"iterations", result.iterations},
              {"selected", report.selected}};
}

int run_rank(const PipelineConfig& config, const std::string& matrix_path,
             const std::string& observations_path,
             const std::string& out_path, const std::string& tie_policy,
             double dampen) {
  judging::WinRateMatrix matrix;
  std::vector<std::string> inputs;
  if (!matrix_path.empty()) {
    require_file(matrix_path);
    matrix = judging::read_win_matrix_file(matrix_path);
    inputs.push_back(matrix_path);
  } else if (!observations_path.empty()) {
    require_file(observations_path);
    auto observations =
        judging::read_observations_jsonl_file(observations_path);
    matrix = judging::build_win_matrix(observations);
    inputs.push_back(observations_path);
  } else {
    throw ValidationError("rank needs --matrix or --observations");
  }

  ranking::IlsrOptions options;
  options.tie_policy = tie_policy == "discard"
                           ? ranking::TiePolicy::Discard
                           : ranking::TiePolicy::Half;
  options.dampen = dampen;
  auto ilsr = ranking::ilsr_rank(matrix, options);
  auto lsr = ranking::lsr_rank(matrix, dampen);

  json out = ranking_to_json(ilsr);
  out["method"] = "ilsr";
  out["tie_policy"] = tie_policy == "discard" ? "discard" : "half";
  out["dampen"] = dampen;
  out["lsr"] = ranking_to_json(lsr);
  write_file_atomic(out_path, out.dump(2) + "\n");
  auto manifest = make_manifest("rank", config, inputs);
  write_manifest(manifest, out_path);

  auto report = ranking::rank_report(ilsr);
  std::cout << "rank: selected " << report.selected << "\n";
  for (const auto& entry : report.entries) {
    std::cout << "  " << entry.name << "  pi=" << entry.pi
              << "  logit=" << entry.logit
              << (entry.tied_with_previous ? "  (tied)" : "") << "\n";
  }
  return kExitOk;
}

// --------------------------------------------------------------- prompt --

int run_prompt(const PipelineConfig& config, const std::string& in_path,
               const std::string& out_path, const std::string& mode_name,
               const std::string& sections_arg) {
  require_file(in_path);
  auto records = corpus::read_records_jsonl_file(in_path);
  prompting::PromptMode mode;
  if (mode_name == "universal") {
    mode = prompting::PromptMode::universal();
  } else if (mode_name == "specific") {
    std::set<SectionKind> sections;
    std::stringstream ss(sections_arg);
    std::string alias;
    while (std::getline(ss, alias, ',')) {
      auto kind = section_from_alias(alias);
      if (!kind) {
        throw ValidationError("unknown section alias '" + alias +
                              "' (use dd,op,mh,pr,tc)");
      }
      sections.insert(*kind);
    }
    mode = prompting::PromptMode::specific(std::move(sections));
  } else {
    throw ValidationError("--mode must be universal or specific");
  }
  prompting::TokenBudget budget;
  budget.max_tokens = config.prompt_budget;
  const std::string& instruction = config.prompt_instruction
                                       ? *config.prompt_instruction
                                       : prompting::default_instruction();

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + out_path);
  for (const auto& record : records) {
    auto rendered = prompting::render_prompt(record, mode, budget, instruction);
    json line{{"id", record.id},
              {"prompt", rendered.text},
              {"target",
               prompting::format_target(record.main_code, record.other_codes)},
              {"warnings", rendered.warnings}};
    out << line.dump() << '\n';
  }
  out.close();
  auto manifest = make_manifest("prompt", config, {in_path});
  write_manifest(manifest, out_path);
  std::cout << "prompt: wrote " << records.size() << " pairs\n";
  return kExitOk;
}

// ----------------------------------------------------------------- eval --

std::map<std::string, prompting::PredictionCodes> read_predictions(
    const std::string& path) {
  require_file(path);
  std::ifstream in(path);
  std::map<std::string, prompting::PredictionCodes> predictions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id")) {
      throw IoError(path + " line " + std::to_string(line_no) +
                    ": invalid prediction line");
    }
    std::string id = j["id"].get<std::string>();
    prompting::PredictionCodes codes;
    if (j.contains("raw_output")) {
      codes = prompting::parse_prediction(j["raw_output"].get<std::string>());
    } else {
      if (j.contains("main_code") && j["main_code"].is_string()) {
        auto validated = validate_code(j["main_code"].get<std::string>());
        if (validated) {
          codes.main_code = validated.code;
        } else {
          codes.parse_warnings.push_back("invalid main code");
        }
      }
      std::set<IcdCode> seen;
      if (codes.main_code) seen.insert(*codes.main_code);
      if (j.contains("other_codes") && j["other_codes"].is_array()) {
        for (const auto& c : j["other_codes"]) {
          auto validated = validate_code(c.get<std::string>());
          if (!validated) {
            codes.parse_warnings.push_back("invalid code");
            continue;
          }
          if (seen.insert(*validated.code).second) {
            codes.other_codes.push_back(*validated.code);
          }
        }
      }
    }
    predictions[id] = std::move(codes);
  }
  return predictions;
}

int run_eval(const PipelineConfig& config, const std::string& gold_path,
             const std::string& predictions_path,
             const std::string& train_path, const std::string& out_path,
             bool allow_missing) {
  require_file(gold_path);
  auto gold = corpus::read_records_jsonl_file(gold_path);
  auto predictions = read_predictions(predictions_path);
  // the top-K set comes from the training corpus when one is given
  auto frequency = corpus::code_frequency(
      train_path.empty() ? gold
                         : corpus::read_records_jsonl_file(train_path));
  evaluation::EvaluateOptions options;
  options.top_k = config.top_k;
  options.allow_missing = allow_missing;
  auto reports = evaluation::evaluate(gold, predictions, frequency, options);
  write_file_atomic(out_path, evaluation::reports_to_json(reports) + "\n");
  std::vector<std::string> inputs{gold_path, predictions_path};
  if (!train_path.empty()) inputs.push_back(train_path);
  auto manifest = make_manifest("eval", config, inputs);
  write_manifest(manifest, out_path);
  for (const auto& r : reports) {
    std::cout << "eval[" << r.scope << "]: P=" << r.precision
              << " R=" << r.recall << " F=" << r.f1 << " MDCA=" << r.mdca
              << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ICD-10-CM coding pipeline", "icdpipe"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::uint64_t seed_flag = 0;
  bool seed_set = false;
  std::size_t parallelism_flag = 0;
  bool allow_missing = false;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed_flag, "seed for all stochastic tie-breaks")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_option("--parallelism", parallelism_flag,
                 "bound on concurrent model calls");
  app.add_flag("--allow-missing", allow_missing,
               "score records without predictions as empty sets");

  // clean
  auto* clean = app.add_subcommand("clean", "validate and normalize a corpus");
  std::string clean_in, clean_out, clean_rejects, clean_table;
  clean->add_option("--in", clean_in, "raw corpus JSONL")->required();
  clean->add_option("--out", clean_out, "cleaned corpus JSONL")->required();
  clean->add_option("--rejects", clean_rejects, "rejection log JSONL");
  clean->add_option("--code-table", clean_table,
                    "canonical code list for strict validation");

  // split
  auto* split = app.add_subcommand("split", "stratified train/dev/test split");
  std::string split_in, split_dir;
  double ratio_train = -1, ratio_dev = -1, ratio_test = -1;
  split->add_option("--in", split_in, "cleaned corpus JSONL")->required();
  split->add_option("--out-dir", split_dir, "output directory")->required();
  split->add_option("--train", ratio_train, "train fraction");
  split->add_option("--dev", ratio_dev, "dev fraction");
  split->add_option("--test", ratio_test, "test fraction");

  // dedup
  auto* dedup_cmd = app.add_subcommand("dedup", "redundancy-aware sampling");
  std::string dedup_in, dedup_out, dedup_report;
  double threshold_flag = -1, margin_flag = -1;
  std::string index_flag;
  dedup_cmd->add_option("--in", dedup_in, "cleaned corpus JSONL")->required();
  dedup_cmd->add_option("--out", dedup_out, "reduced corpus JSONL")
      ->required();
  dedup_cmd->add_option("--report", dedup_report, "report JSON")->required();
  dedup_cmd->add_option("--threshold", threshold_flag,
                        "similarity threshold (default 0.9)");
  dedup_cmd->add_option("--ppl-margin", margin_flag,
                        "relative PPL margin (default 0.05)");
  dedup_cmd->add_option("--index", index_flag, "exact|ann");

  // judge
  auto* judge = app.add_subcommand("judge", "pairwise LLM-as-judge tournament");
  std::string judge_candidates, judge_probes, judge_probes_from;
  std::string judge_endpoint, judge_out, judge_matrix, order_policy = "fixed";
  judge->add_option("--candidates", judge_candidates,
                    "candidates config JSON")
      ->required();
  judge->add_option("--probes-file", judge_probes, "one probe code per line");
  judge->add_option("--probes-from", judge_probes_from,
                    "corpus JSONL; probes = top-K most frequent codes");
  judge->add_option("--judge-endpoint", judge_endpoint,
                    "HTTP endpoint for the judge model");
  judge->add_option("--out", judge_out, "observations JSONL")->required();
  judge->add_option("--matrix", judge_matrix, "win matrix JSON")->required();
  judge->add_option("--order-policy", order_policy, "fixed|both");

  // rank
  auto* rank = app.add_subcommand("rank", "Plackett-Luce strength estimation");
  std::string rank_matrix, rank_observations, rank_out;
  std::string tie_policy = "half";
  double dampen = 0.0;
  rank->add_option("--matrix", rank_matrix, "win matrix JSON");
  rank->add_option("--observations", rank_observations, "observations JSONL");
  rank->add_option("--out", rank_out, "ranking JSON")->required();
  rank->add_option("--tie-policy", tie_policy, "half|discard");
  rank->add_option("--dampen", dampen,
                   "add epsilon to every off-diagonal rate (exploratory)");

  // prompt
  auto* prompt = app.add_subcommand("prompt", "build instruction prompts");
  std::string prompt_in, prompt_out, prompt_mode = "universal";
  std::string prompt_sections = "dd";
  int budget_flag = -1;
  prompt->add_option("--in", prompt_in, "cleaned corpus JSONL")->required();
  prompt->add_option("--out", prompt_out, "prompts JSONL")->required();
  prompt->add_option("--mode", prompt_mode, "universal|specific");
  prompt->add_option("--sections", prompt_sections,
                     "comma-separated aliases for specific mode "
                     "(dd,op,mh,pr,tc)");
  prompt->add_option("--budget", budget_flag, "token budget (default 2048)");

  // eval
  auto* eval = app.add_subcommand("eval", "score predictions against gold");
  std::string eval_gold, eval_predictions, eval_train, eval_out;
  std::size_t top_k_flag = 0;
  eval->add_option("--gold", eval_gold, "gold corpus JSONL")->required();
  eval->add_option("--predictions", eval_predictions, "predictions JSONL")
      ->required();
  eval->add_option("--train", eval_train,
                   "training corpus JSONL (top-K frequency source)");
  eval->add_option("--out", eval_out, "report JSON")->required();
  eval->add_option("--top-k", top_k_flag, "top-K scope size (default 50)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    PipelineConfig config = load_config(config_path);
    if (seed_set) config.seed = seed_flag;
    if (parallelism_flag > 0) config.parallelism = parallelism_flag;
    if (ratio_train > 0) config.ratios.train = ratio_train;
    if (ratio_dev > 0) config.ratios.dev = ratio_dev;
    if (ratio_test > 0) config.ratios.test = ratio_test;
    if (threshold_flag > 0) config.dedup_threshold = threshold_flag;
    if (margin_flag >= 0) config.ppl_margin = margin_flag;
    if (!index_flag.empty()) config.dedup_index = index_flag;
    if (budget_flag > 0) config.prompt_budget = budget_flag;
    if (top_k_flag > 0) config.top_k = top_k_flag;
    config.validate();

    if (clean->parsed()) {
      return run_clean(config, clean_in, clean_out, clean_rejects,
                       clean_table);
    }
    if (split->parsed()) return run_split(config, split_in, split_dir);
    if (dedup_cmd->parsed()) {
      return run_dedup(config, dedup_in, dedup_out, dedup_report);
    }
    if (judge->parsed()) {
      if (order_policy != "fixed" && order_policy != "both") {
        throw ValidationError("--order-policy must be fixed or both");
      }
      return run_judge(config, judge_candidates, judge_probes,
                       judge_probes_from, judge_endpoint, judge_out,
                       judge_matrix, order_policy);
    }
    if (rank->parsed()) {
      if (tie_policy != "half" && tie_policy != "discard") {
        throw ValidationError("--tie-policy must be half or discard");
      }
      if (dampen < 0.0) throw ValidationError("--dampen must be >= 0");
      return run_rank(config, rank_matrix, rank_observations, rank_out,
                      tie_policy, dampen);
    }
    if (prompt->parsed()) {
      return run_prompt(config, prompt_in, prompt_out, prompt_mode,
                        prompt_sections);
    }
    if (eval->parsed()) {
      return run_eval(config, eval_gold, eval_predictions, eval_train,
                      eval_out, allow_missing);
    }
    return kExitValidation;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return kExitTransport;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
