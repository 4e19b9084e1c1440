#pragma once

// Text embedding providers. The default is a deterministic offline feature
// hasher (unigrams + bigrams, signed buckets, L2-normalized); a remote
// provider calling an embeddings HTTP endpoint can be swapped in. A small
// cache sits in front of either, since rule texts repeat heavily.

#include "rbrl/common.hpp"

#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace rbrl {

struct EmbeddingConfig {
  std::string provider = "hash";  // hash | remote
  int dim = 768;
  int cache_capacity = 4096;

  // remote provider settings
  std::string endpoint;                      // e.g. https://api.example.com
  std::string path = "/v1/embeddings";
  std::string model = "text-embedding-3-small";
  std::string api_key_env = "RBRL_API_KEY";
  int max_retries = 3;
  int timeout_sec = 30;

  void validate() const;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Vec embed(const std::string& text) = 0;
  virtual int dim() const = 0;
};

class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(int dim);
  Vec embed(const std::string& text) override;
  int dim() const override { return dim_; }

 private:
  int dim_;
};

// Thread-safe LRU cache in front of any embedder.
class CachedEmbedder : public Embedder {
 public:
  CachedEmbedder(std::unique_ptr<Embedder> inner, int capacity);
  Vec embed(const std::string& text) override;
  int dim() const override { return inner_->dim(); }
  long long hits() const { return hits_; }
  long long misses() const { return misses_; }

 private:
  std::unique_ptr<Embedder> inner_;
  int capacity_;
  std::mutex mu_;
  std::list<std::string> order_;  // most recent first
  std::map<std::string, std::pair<Vec, std::list<std::string>::iterator>> entries_;
  long long hits_ = 0;
  long long misses_ = 0;
};

// Factory honoring config.provider; remote construction requires the API key
// environment variable to be set.
std::unique_ptr<Embedder> make_embedder(const EmbeddingConfig& cfg);

}  // namespace rbrl
