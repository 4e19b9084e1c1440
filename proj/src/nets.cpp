#include "rbrl/nets.hpp"

#include <cmath>

namespace rbrl {

void NetConfig::validate() const {
  if (state_dim <= 0) throw ConfigError("net: state_dim must be positive");
  if (embed_dim <= 0) throw ConfigError("net: embed_dim must be positive");
  if (hidden_dim <= 0) throw ConfigError("net: hidden_dim must be positive");
  if (n_heads <= 0 || hidden_dim % n_heads != 0)
    throw ConfigError("net: hidden_dim must be divisible by n_heads");
  if (cross_layers < 1) throw ConfigError("net: at least one cross-attention layer required");
  if (self_layers < 0) throw ConfigError("net: self_layers must be >= 0");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("net: dropout must be in [0, 1)");
}

// ---------------------------------------------------------------------------
// Blocks

Mat CrossAttnBlock::forward(const Mat& queries, const Mat& key_token, bool training, Rng& rng) {
  Mat attn = mha.forward(queries, key_token, key_token);
  return ln.forward(queries + drop.forward(attn, training, rng));
}

Mat CrossAttnBlock::backward(const Mat& dy, Mat& d_key) {
  Mat d_sum = ln.backward(dy);
  Mat d_attn = drop.backward(d_sum);
  auto g = mha.backward(d_attn);
  d_key += g.dk + g.dv;
  return d_sum + g.dq;  // residual path plus query path
}

Mat SelfAttnBlock::forward(const Mat& x, bool training, Rng& rng) {
  Mat attn = mha.forward(x, x, x);
  return ln.forward(x + drop.forward(attn, training, rng));
}

Mat SelfAttnBlock::backward(const Mat& dy) {
  Mat d_sum = ln.backward(dy);
  Mat d_attn = drop.backward(d_sum);
  auto g = mha.backward(d_attn);
  return d_sum + g.dq + g.dk + g.dv;
}

// ---------------------------------------------------------------------------
// AttentionNet

AttentionNet::AttentionNet(const NetConfig& cfg, uint64_t seed, const std::string& name)
    : cfg_(cfg), drop_rng_(derive_seed(seed, 0x9d0b)) {
  cfg_.validate();
  Rng rng(seed);
  state_proj_ = Linear(name + ".state_proj", cfg_.state_dim, cfg_.hidden_dim, rng);
  rule_proj_ = Linear(name + ".rule_proj", cfg_.embed_dim, cfg_.hidden_dim, rng);
  cross_.resize(cfg_.cross_layers);
  for (int i = 0; i < cfg_.cross_layers; ++i) {
    std::string bn = name + ".cross" + std::to_string(i);
    cross_[i].mha = MultiHeadAttention(bn + ".mha", cfg_.hidden_dim, cfg_.n_heads, rng);
    cross_[i].drop = Dropout(cfg_.dropout);
    cross_[i].ln = LayerNorm(bn + ".ln", cfg_.hidden_dim);
  }
  selfb_.resize(cfg_.self_layers);
  for (int i = 0; i < cfg_.self_layers; ++i) {
    std::string bn = name + ".self" + std::to_string(i);
    selfb_[i].mha = MultiHeadAttention(bn + ".mha", cfg_.hidden_dim, cfg_.n_heads, rng);
    selfb_[i].drop = Dropout(cfg_.dropout);
    selfb_[i].ln = LayerNorm(bn + ".ln", cfg_.hidden_dim);
  }
  head_ = Linear(name + ".head", cfg_.hidden_dim, 1, rng, /*zero_bias=*/true);
}

Vec AttentionNet::forward(const Vec& state, const Mat& rules, bool training) {
  if (state.size() != cfg_.state_dim) throw std::invalid_argument("net: state dim mismatch");
  if (rules.cols() != cfg_.embed_dim) throw std::invalid_argument("net: rule embed dim mismatch");
  last_rules_ = static_cast<int>(rules.rows());

  key_token_ = state_act_.forward(state_proj_.forward(state.transpose()));
  Mat h = rule_proj_.forward(rules);
  for (auto& blk : cross_) h = blk.forward(h, key_token_, training, drop_rng_);
  for (auto& blk : selfb_) h = blk.forward(h, training, drop_rng_);
  Mat out = head_.forward(h);  // (num_rules, 1)

  Vec result(last_rules_);
  clamp_pass_ = Mat::Ones(last_rules_, 1);
  for (int i = 0; i < last_rules_; ++i) {
    double v = out(i, 0);
    if (cfg_.clamp_output && std::fabs(v) > cfg_.clamp_value) {
      result(i) = v > 0 ? cfg_.clamp_value : -cfg_.clamp_value;
      clamp_pass_(i, 0) = 0.0;
    } else {
      result(i) = v;
    }
  }
  return result;
}

void AttentionNet::backward(const Vec& d_out) {
  if (d_out.size() != last_rules_) throw std::invalid_argument("net: backward dim mismatch");
  Mat dy = d_out;
  Mat d_head = dy.cwiseProduct(clamp_pass_);
  Mat dh = head_.backward(d_head);
  for (auto it = selfb_.rbegin(); it != selfb_.rend(); ++it) dh = it->backward(dh);
  Mat d_key = Mat::Zero(1, cfg_.hidden_dim);
  for (auto it = cross_.rbegin(); it != cross_.rend(); ++it) dh = it->backward(dh, d_key);
  rule_proj_.backward(dh);
  state_proj_.backward(state_act_.backward(d_key));
}

void AttentionNet::visit(const ParamVisitor& fn) {
  state_proj_.visit(fn);
  rule_proj_.visit(fn);
  for (auto& blk : cross_) {
    blk.mha.visit(fn);
    blk.ln.visit(fn);
  }
  for (auto& blk : selfb_) {
    blk.mha.visit(fn);
    blk.ln.visit(fn);
  }
  head_.visit(fn);
}

std::vector<Param*> AttentionNet::params() {
  std::vector<Param*> out;
  visit([&](Param& p) { out.push_back(&p); });
  return out;
}

void AttentionNet::zero_grad() {
  visit([](Param& p) { p.zero_grad(); });
}

void AttentionNet::blend_from(AttentionNet& src, double tau) {
  auto mine = params();
  auto theirs = src.params();
  if (mine.size() != theirs.size()) throw std::logic_error("net: blend across unlike nets");
  for (size_t i = 0; i < mine.size(); ++i)
    mine[i]->w = tau * theirs[i]->w + (1.0 - tau) * mine[i]->w;
}

// ---------------------------------------------------------------------------
// Categorical helpers

Vec safe_log(const Vec& probs) {
  return probs.unaryExpr([](double p) { return std::log(std::max(p, 1e-45)); });
}

double categorical_entropy(const Vec& probs) {
  double h = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    if (probs(i) > 0.0) h -= probs(i) * std::log(probs(i));
  }
  return h;
}

int sample_categorical(const Vec& probs, Rng& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (u < acc) return i;
  }
  return static_cast<int>(probs.size()) - 1;
}

int argmax_index(const Vec& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

}  // namespace rbrl
