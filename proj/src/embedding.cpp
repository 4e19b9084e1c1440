#include "rbrl/embedding.hpp"

#include "rbrl/text.hpp"

#include <cctype>
#include <cmath>

namespace rbrl {

void EmbeddingConfig::validate() const {
  if (provider != "hash" && provider != "remote")
    throw ConfigError("embedding: provider must be 'hash' or 'remote'");
  if (dim <= 0) throw ConfigError("embedding: dim must be positive");
  if (cache_capacity < 0) throw ConfigError("embedding: cache_capacity must be >= 0");
  if (provider == "remote" && endpoint.empty())
    throw ConfigError("embedding: remote provider requires an endpoint");
}

namespace {

// FNV-1a, 64 bit: deterministic across builds, unlike std::hash.
uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> toks;
  std::string cur;
  for (char raw : text) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (std::isalnum(c) || raw == '.') {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      toks.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) toks.push_back(cur);
  return toks;
}

}  // namespace

HashEmbedder::HashEmbedder(int dim) : dim_(dim) {
  if (dim <= 0) throw ConfigError("embedding: dim must be positive");
}

Vec HashEmbedder::embed(const std::string& text) {
  Vec v = Vec::Zero(dim_);
  auto toks = tokenize(text);
  auto bump = [&](const std::string& feature) {
    uint64_t h = fnv1a(feature);
    int idx = static_cast<int>(h % static_cast<uint64_t>(dim_));
    double sign = (h >> 63) ? -1.0 : 1.0;
    v(idx) += sign;
  };
  for (const auto& t : toks) bump("u:" + t);
  for (size_t i = 0; i + 1 < toks.size(); ++i) bump("b:" + toks[i] + "_" + toks[i + 1]);
  double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

CachedEmbedder::CachedEmbedder(std::unique_ptr<Embedder> inner, int capacity)
    : inner_(std::move(inner)), capacity_(capacity) {}

Vec CachedEmbedder::embed(const std::string& text) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(text);
    if (it != entries_.end()) {
      ++hits_;
      order_.erase(it->second.second);
      order_.push_front(text);
      it->second.second = order_.begin();
      return it->second.first;
    }
    ++misses_;
  }
  Vec v = inner_->embed(text);
  std::lock_guard<std::mutex> lock(mu_);
  if (capacity_ > 0 && !entries_.count(text)) {
    order_.push_front(text);
    entries_[text] = {v, order_.begin()};
    if (static_cast<int>(entries_.size()) > capacity_) {
      entries_.erase(order_.back());
      order_.pop_back();
    }
  }
  return v;
}

std::unique_ptr<Embedder> make_remote_embedder(const EmbeddingConfig& cfg);  // remote.cpp

std::unique_ptr<Embedder> make_embedder(const EmbeddingConfig& cfg) {
  cfg.validate();
  std::unique_ptr<Embedder> base;
  if (cfg.provider == "hash") {
    base = std::make_unique<HashEmbedder>(cfg.dim);
  } else {
    base = make_remote_embedder(cfg);
  }
  if (cfg.cache_capacity > 0)
    return std::make_unique<CachedEmbedder>(std::move(base), cfg.cache_capacity);
  return base;
}

}  // namespace rbrl
