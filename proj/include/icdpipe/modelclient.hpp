#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace icdpipe::model {

struct GenerationRequest {
  std::string prompt;
  int max_tokens = 256;
  double temperature = 0.0;
  std::vector<std::string> stop;
};

/// Per-token natural-log probabilities. Lengths match; every entry <= 0.
struct TokenLogProbs {
  std::vector<std::string> tokens;
  std::vector<double> logprobs;
};

/// A unit-L2-normalized embedding.
struct EmbeddingVector {
  Eigen::VectorXd values;

  Eigen::Index dim() const { return values.size(); }
};

/// exp(-mean(logprobs)). Throws EmptyInputError on an empty sequence.
double perplexity(const TokenLogProbs& lp);

/// Abstract model access. Implementations must be safe to share across
/// threads; each call is independent.
class ModelClient {
 public:
  virtual ~ModelClient() = default;

  virtual std::string generate(const GenerationRequest& request) = 0;
  virtual TokenLogProbs token_logprobs(const std::string& text) = 0;
  virtual EmbeddingVector embed(const std::string& text) = 0;

  /// Human-readable identity for reports ("mock(seed=7)", endpoint URL).
  virtual std::string describe() const = 0;
};

/// Deterministic offline stand-in. Every output is a pure function of
/// (seed, input): generations echo a digest of the prompt, logprobs come
/// from per-token hashes in [-5, 0), and embeddings hash character n-grams
/// into the configured dimension, so similar texts get correlated vectors.
class MockClient : public ModelClient {
 public:
  explicit MockClient(std::uint64_t seed = 0, Eigen::Index embed_dim = 384);

  std::string generate(const GenerationRequest& request) override;
  TokenLogProbs token_logprobs(const std::string& text) override;
  EmbeddingVector embed(const std::string& text) override;
  std::string describe() const override;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  Eigen::Index embed_dim_;
};

struct HttpClientConfig {
  std::string base_url;                      // e.g. http://127.0.0.1:8080
  std::string completions_path = "/v1/completions";
  std::string embeddings_path = "/v1/embeddings";
  std::string api_key;                       // sent as Authorization: Bearer
  std::string embed_base_url;                // defaults to base_url
  Eigen::Index embed_dim = 0;                // 0 = accept whatever comes back
  double timeout_seconds = 60.0;
  int retries = 3;
  double backoff_initial_seconds = 0.5;      // doubled per retry
};

/// Completions-style JSON-over-HTTP client.
///
/// POST completions_path {"prompt","max_tokens","temperature","stop"?,
/// "logprobs"?} -> {"text", "tokens"?, "logprobs"?}; POST embeddings_path
/// {"input"} -> {"embedding": [...]}. Transient transport failures and 5xx
/// answers are retried with exponential backoff.
class HttpModelClient : public ModelClient {
 public:
  explicit HttpModelClient(HttpClientConfig config);

  std::string generate(const GenerationRequest& request) override;
  TokenLogProbs token_logprobs(const std::string& text) override;
  EmbeddingVector embed(const std::string& text) override;
  std::string describe() const override;

 private:
  std::string post_json(const std::string& base, const std::string& path,
                        const std::string& body);
  HttpClientConfig config_;
};

/// Config-driven construction: kind "mock" (seed, dim) or "http"
/// (endpoints + env-var overrides MODEL_ENDPOINT / MODEL_API_KEY /
/// EMBED_ENDPOINT).
struct ClientConfig {
  std::string kind = "mock";
  std::uint64_t seed = 0;
  Eigen::Index embed_dim = 384;
  HttpClientConfig http;
};

std::shared_ptr<ModelClient> make_client(const ClientConfig& config);

}  // namespace icdpipe::model
