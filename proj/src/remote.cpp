#include "rbrl/remote.hpp"

#include "rbrl/embedding.hpp"
#include "rbrl/text.hpp"

#include "httplib.h"
#include "json.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

namespace rbrl {

using nlohmann::json;

void RemoteLlmConfig::validate() const {
  if (endpoint.empty()) throw ConfigError("remote: endpoint must be set");
  if (path.empty() || path[0] != '/') throw ConfigError("remote: path must start with '/'");
  if (max_retries < 0) throw ConfigError("remote: max_retries must be >= 0");
  if (timeout_sec <= 0) throw ConfigError("remote: timeout_sec must be positive");
  if (max_tokens < 1) throw ConfigError("remote: max_tokens must be >= 1");
}

namespace {

httplib::Headers auth_headers(const std::string& api_key_env) {
  httplib::Headers headers;
  if (!api_key_env.empty()) {
    if (const char* key = std::getenv(api_key_env.c_str())) {
      if (*key) headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  return headers;
}

// POSTs a JSON body, retrying transient failures with capped exponential
// backoff; returns the parsed reply or throws TransportError.
json post_json(const std::string& endpoint, const std::string& path,
               const std::string& api_key_env, double timeout_sec, int max_retries,
               const json& body) {
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    if (attempt > 0) {
      const int ms = std::min(2000, 250 << (attempt - 1));
      std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    }
    httplib::Client cli(endpoint);
    cli.set_connection_timeout(std::chrono::milliseconds(
        static_cast<int>(timeout_sec * 1000)));
    cli.set_read_timeout(std::chrono::milliseconds(static_cast<int>(timeout_sec * 1000)));
    auto res = cli.Post(path, auth_headers(api_key_env), body.dump(), "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      // Client errors other than rate limiting will not heal on retry.
      if (res->status >= 400 && res->status < 500 && res->status != 429) break;
      continue;
    }
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) {
      last_error = "reply was not valid JSON";
      continue;
    }
    return parsed;
  }
  throw TransportError("remote " + path + ": " + last_error);
}

class RemoteBackend : public LlmBackend {
 public:
  explicit RemoteBackend(RemoteLlmConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  std::string complete(const CompletionRequest& req) override {
    json body;
    body["model"] = cfg_.model;
    body["temperature"] = req.temperature;
    body["max_tokens"] = cfg_.max_tokens;
    body["messages"] = json::array({json{{"role", "user"}, {"content", req.prompt}}});
    json reply = post_json(cfg_.endpoint, cfg_.path, cfg_.api_key_env, cfg_.timeout_sec,
                           cfg_.max_retries, body);
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      throw TransportError(std::string("remote completion: malformed reply: ") + e.what());
    }
  }

  std::string name() const override { return "remote:" + cfg_.model; }

 private:
  RemoteLlmConfig cfg_;
};

class RemoteEmbedder : public Embedder {
 public:
  explicit RemoteEmbedder(EmbeddingConfig cfg) : cfg_(std::move(cfg)) {}

  Vec embed(const std::string& text) override {
    json body;
    body["model"] = cfg_.model;
    body["input"] = json::array({text});
    json reply = post_json(cfg_.endpoint, cfg_.path, cfg_.api_key_env,
                           static_cast<double>(cfg_.timeout_sec), cfg_.max_retries, body);
    try {
      const json& emb = reply.at("data").at(0).at("embedding");
      if (static_cast<int>(emb.size()) != cfg_.dim)
        throw TransportError("remote embedding: got dim " + std::to_string(emb.size()) +
                             ", expected " + std::to_string(cfg_.dim));
      Vec v(cfg_.dim);
      for (int i = 0; i < cfg_.dim; ++i) v(i) = emb.at(i).get<double>();
      return v;
    } catch (const json::exception& e) {
      throw TransportError(std::string("remote embedding: malformed reply: ") + e.what());
    }
  }

  int dim() const override { return cfg_.dim; }

 private:
  EmbeddingConfig cfg_;
};

}  // namespace

std::shared_ptr<LlmBackend> make_remote_backend(const RemoteLlmConfig& cfg) {
  return std::make_shared<RemoteBackend>(cfg);
}

std::unique_ptr<Embedder> make_remote_embedder(const EmbeddingConfig& cfg) {
  return std::make_unique<RemoteEmbedder>(cfg);
}

}  // namespace rbrl
