#pragma once

// Attention network shared by the rule-selection actor and the critics.
// A numeric state is projected to a single key/value token; candidate-rule
// embeddings are projected to query tokens that cross-attend to that token,
// pass through self-attention blocks, and end in a per-rule scalar head.
// The actor reads the head as logits (clamped before softmax); the critics
// read it as per-rule action values (unclamped).

#include "rbrl/common.hpp"
#include "rbrl/layers.hpp"

#include <string>
#include <vector>

namespace rbrl {

struct NetConfig {
  int state_dim = 0;
  int embed_dim = 768;
  int hidden_dim = 16;
  int n_heads = 4;
  int cross_layers = 1;
  int self_layers = 1;
  double dropout = 0.05;
  bool clamp_output = true;  // actors clamp logits; critics leave Q unbounded
  double clamp_value = 50.0;

  void validate() const;
};

// Pre-norm style residual block: out = LayerNorm(x + Dropout(Attn(...))).
struct CrossAttnBlock {
  MultiHeadAttention mha;
  Dropout drop;
  LayerNorm ln;

  Mat forward(const Mat& queries, const Mat& key_token, bool training, Rng& rng);
  // Returns gradient w.r.t. queries; accumulates gradient w.r.t. the key
  // token into d_key (summing key and value paths).
  Mat backward(const Mat& dy, Mat& d_key);
};

struct SelfAttnBlock {
  MultiHeadAttention mha;
  Dropout drop;
  LayerNorm ln;

  Mat forward(const Mat& x, bool training, Rng& rng);
  Mat backward(const Mat& dy);
};

class AttentionNet {
 public:
  AttentionNet() = default;
  AttentionNet(const NetConfig& cfg, uint64_t seed, const std::string& name = "net");

  // state: (state_dim), rules: (num_rules, embed_dim) -> per-rule scalar.
  Vec forward(const Vec& state, const Mat& rules, bool training = false);
  // Backward through the most recent forward; accumulates parameter grads.
  void backward(const Vec& d_out);

  void visit(const ParamVisitor& fn);
  std::vector<Param*> params();
  void zero_grad();
  // Polyak blend: this <- tau * src + (1 - tau) * this. tau = 1 is a copy.
  void blend_from(AttentionNet& src, double tau);

  const NetConfig& config() const { return cfg_; }
  Rng& dropout_rng() { return drop_rng_; }

 private:
  NetConfig cfg_;
  Linear state_proj_;
  Silu state_act_;
  Linear rule_proj_;
  std::vector<CrossAttnBlock> cross_;
  std::vector<SelfAttnBlock> selfb_;
  Linear head_;
  Rng drop_rng_;

  // caches for backward
  Mat key_token_;
  Mat clamp_pass_;  // 1 where the clamp was inactive
  int last_rules_ = 0;
};

// Categorical helpers shared by the trainers.
Vec safe_log(const Vec& probs);
double categorical_entropy(const Vec& probs);
int sample_categorical(const Vec& probs, Rng& rng);
int argmax_index(const Vec& v);

}  // namespace rbrl
