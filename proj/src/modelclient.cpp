#include "icdpipe/modelclient.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "icdpipe/errors.hpp"
#include "icdpipe/hashing.hpp"

namespace icdpipe::model {

using nlohmann::json;

double perplexity(const TokenLogProbs& lp) {
  if (lp.logprobs.empty()) {
    throw EmptyInputError("perplexity of an empty sequence");
  }
  double sum = 0.0;
  for (double l : lp.logprobs) sum += l;
  return std::exp(-sum / static_cast<double>(lp.logprobs.size()));
}

namespace {

std::vector<std::string> whitespace_tokens(const std::string& text) {
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
    if (j > i) tokens.push_back(text.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::string hex64(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace

MockClient::MockClient(std::uint64_t seed, Eigen::Index embed_dim)
    : seed_(seed), embed_dim_(embed_dim) {
  if (embed_dim_ < 1) throw ValidationError("mock embed dim must be >= 1");
}

std::string MockClient::generate(const GenerationRequest& request) {
  if (request.max_tokens < 1) {
    throw ValidationError("max_tokens must be >= 1");
  }
  if (request.temperature < 0.0) {
    throw ValidationError("temperature must be >= 0");
  }
  std::uint64_t h = seeded_hash(seed_, request.prompt);
  // a few pseudo-words so downstream token handling sees realistic shape
  std::string out = "mock";
  std::uint64_t w = h;
  for (int i = 0; i < 4; ++i) {
    w = splitmix64(w);
    out += " " + hex64(w).substr(0, 6);
  }
  return out;
}

TokenLogProbs MockClient::token_logprobs(const std::string& text) {
  if (text.empty()) throw EmptyInputError("token_logprobs of empty text");
  TokenLogProbs lp;
  lp.tokens = whitespace_tokens(text);
  if (lp.tokens.empty()) lp.tokens.push_back(text);
  lp.logprobs.reserve(lp.tokens.size());
  for (const auto& token : lp.tokens) {
    std::uint64_t h = seeded_hash(seed_ ^ 0x706c6fULL, token);
    lp.logprobs.push_back(-5.0 * unit_double(h));  // in [-5, 0)
  }
  return lp;
}

EmbeddingVector MockClient::embed(const std::string& text) {
  if (text.empty()) throw EmptyInputError("embed of empty text");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(embed_dim_);
  // character n-grams (n = 1..3) feature-hashed with a sign bit
  for (std::size_t n = 1; n <= 3; ++n) {
    if (text.size() < n) break;
    for (std::size_t i = 0; i + n <= text.size(); ++i) {
      std::uint64_t h =
          seeded_hash(seed_ ^ (0x656d62ULL + n), std::string_view(text).substr(i, n));
      Eigen::Index idx = static_cast<Eigen::Index>(h % std::uint64_t(embed_dim_));
      double sign = (h >> 63) ? 1.0 : -1.0;
      v[idx] += sign;
    }
  }
  double norm = v.norm();
  if (norm == 0.0) {
    v[0] = 1.0;
  } else {
    v /= norm;
  }
  return EmbeddingVector{std::move(v)};
}

std::string MockClient::describe() const {
  return "mock(seed=" + std::to_string(seed_) + ")";
}

HttpModelClient::HttpModelClient(HttpClientConfig config)
    : config_(std::move(config)) {
  if (config_.base_url.empty()) {
    throw ValidationError("http client requires a base url");
  }
  if (config_.embed_base_url.empty()) {
    config_.embed_base_url = config_.base_url;
  }
  if (config_.retries < 0) throw ValidationError("retries must be >= 0");
}

std::string HttpModelClient::post_json(const std::string& base,
                                       const std::string& path,
                                       const std::string& body) {
  double backoff = config_.backoff_initial_seconds;
  std::string last_error;
  bool timed_out = false;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2.0;
    }
    httplib::Client client(base);
    client.set_connection_timeout(std::chrono::duration<double>(
        config_.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(
        config_.timeout_seconds));
    if (!config_.api_key.empty()) {
      client.set_default_headers(
          {{"Authorization", "Bearer " + config_.api_key}});
    }
    auto res = client.Post(path, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                  res.error() == httplib::Error::Read;
      continue;  // connection-level failure: retry
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      timed_out = false;
      continue;  // server-side failure: retry
    }
    if (res->status != 200) {
      throw TransportError("endpoint " + base + path + " answered HTTP " +
                           std::to_string(res->status));
    }
    return res->body;
  }
  std::string what = "endpoint " + base + path + " failed after " +
                     std::to_string(config_.retries + 1) +
                     " attempts: " + last_error;
  if (timed_out) throw TimeoutError(what);
  throw TransportError(what);
}

std::string HttpModelClient::generate(const GenerationRequest& request) {
  if (request.max_tokens < 1) {
    throw ValidationError("max_tokens must be >= 1");
  }
  if (request.temperature < 0.0) {
    throw ValidationError("temperature must be >= 0");
  }
  json body{{"prompt", request.prompt},
            {"max_tokens", request.max_tokens},
            {"temperature", request.temperature}};
  if (!request.stop.empty()) body["stop"] = request.stop;
  std::string raw = post_json(config_.base_url, config_.completions_path,
                              body.dump());
  json j = json::parse(raw, nullptr, false);
  if (j.is_discarded() || !j.contains("text") || !j["text"].is_string()) {
    throw MalformedResponseError("completions response lacks a text field");
  }
  return j["text"].get<std::string>();
}

TokenLogProbs HttpModelClient::token_logprobs(const std::string& text) {
  if (text.empty()) throw EmptyInputError("token_logprobs of empty text");
  json body{{"prompt", text},
            {"max_tokens", 1},
            {"temperature", 0.0},
            {"logprobs", true},
            {"echo", true}};
  std::string raw = post_json(config_.base_url, config_.completions_path,
                              body.dump());
  json j = json::parse(raw, nullptr, false);
  if (j.is_discarded()) {
    throw MalformedResponseError("logprobs response is not JSON");
  }
  if (!j.contains("tokens") || !j.contains("logprobs")) {
    throw UnsupportedError("endpoint does not return token logprobs");
  }
  TokenLogProbs lp;
  for (const auto& t : j["tokens"]) lp.tokens.push_back(t.get<std::string>());
  for (const auto& l : j["logprobs"]) lp.logprobs.push_back(l.get<double>());
  if (lp.tokens.size() != lp.logprobs.size() || lp.tokens.empty()) {
    throw MalformedResponseError("tokens/logprobs lengths disagree");
  }
  for (double l : lp.logprobs) {
    if (l > 0.0) throw MalformedResponseError("positive logprob in response");
  }
  return lp;
}

EmbeddingVector HttpModelClient::embed(const std::string& text) {
  if (text.empty()) throw EmptyInputError("embed of empty text");
  json body{{"input", text}};
  std::string raw = post_json(config_.embed_base_url, config_.embeddings_path,
                              body.dump());
  json j = json::parse(raw, nullptr, false);
  if (j.is_discarded() || !j.contains("embedding") ||
      !j["embedding"].is_array()) {
    throw MalformedResponseError("embedding response lacks an embedding");
  }
  const auto& arr = j["embedding"];
  if (config_.embed_dim > 0 &&
      static_cast<Eigen::Index>(arr.size()) != config_.embed_dim) {
    throw DimensionMismatchError(
        "endpoint returned dim " + std::to_string(arr.size()) +
        ", configured " + std::to_string(config_.embed_dim));
  }
  Eigen::VectorXd v(arr.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = arr[i].get<double>();
  double norm = v.norm();
  if (norm == 0.0) {
    throw MalformedResponseError("endpoint returned a zero embedding");
  }
  v /= norm;
  return EmbeddingVector{std::move(v)};
}

std::string HttpModelClient::describe() const {
  return "http(" + config_.base_url + config_.completions_path + ")";
}

std::shared_ptr<ModelClient> make_client(const ClientConfig& config) {
  if (config.kind == "mock") {
    return std::make_shared<MockClient>(config.seed, config.embed_dim);
  }
  if (config.kind == "http") {
    HttpClientConfig http = config.http;
    if (const char* endpoint = std::getenv("MODEL_ENDPOINT")) {
      http.base_url = endpoint;
    }
    if (const char* key = std::getenv("MODEL_API_KEY")) {
      http.api_key = key;
    }
    if (const char* embed = std::getenv("EMBED_ENDPOINT")) {
      http.embed_base_url = embed;
    }
    return std::make_shared<HttpModelClient>(std::move(http));
  }
  throw ValidationError("unknown client kind '" + config.kind + "'");
}

}  // namespace icdpipe::model
