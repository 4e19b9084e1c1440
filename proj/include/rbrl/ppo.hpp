#pragma once

// Numeric PPO baseline operating directly on raw environment state vectors:
// separate tanh-MLP policy and value networks, generalized advantage
// estimation, per-minibatch advantage whitening, clipped surrogate and
// clipped value losses, entropy bonus, and a global gradient-norm clip.

#include "rbrl/checkpoint.hpp"
#include "rbrl/env.hpp"
#include "rbrl/layers.hpp"

#include <functional>
#include <string>
#include <vector>

namespace rbrl {

struct PpoConfig {
  double learning_rate = 2.5e-4;
  int num_envs = 4;
  int num_steps = 512;  // rollout length per environment
  bool anneal_lr = false;
  double gamma = 0.95;
  double gae_lambda = 0.95;
  int num_minibatches = 4;
  int update_epochs = 64;
  bool norm_adv = true;
  double clip_coef = 0.2;
  bool clip_vloss = true;
  double ent_coef = 0.01;
  double vf_coef = 0.5;
  double max_grad_norm = 0.5;
  long long total_timesteps = 50000;
  int hidden_dim = 16;
  int num_hidden_layers = 2;

  void validate() const;
};

// Plain feed-forward stack of Linear layers with tanh between them (none
// after the output layer).
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, int in, int hidden, int hidden_layers, int out, Rng& rng);

  Mat forward(const Mat& x);   // x: (n, in) -> (n, out)
  Mat backward(const Mat& dy); // accumulates parameter grads, returns dx
  void visit(const ParamVisitor& fn);

 private:
  std::vector<Linear> layers_;
  std::vector<Mat> act_;  // cached tanh outputs, one per hidden layer
};

// Backward generalized-advantage recursion over one environment's
// trajectory. dones[t] flags an episode boundary after step t;
// bootstrap_value is V(s_T), used only when the rollout was cut mid-episode.
struct GaeOut {
  Vec advantages;
  Vec returns;
};
GaeOut gae(const Vec& rewards, const Vec& values, const std::vector<uint8_t>& dones,
           double bootstrap_value, double gamma, double lambda);

// (x - mean) / (std + 1e-8), population std.
Vec whiten(const Vec& x);

// One minibatch through the clipped PPO objective, as a pure function of the
// fresh network outputs so its gradients can be finite-difference checked.
// Advantages are whitened inside when cfg.norm_adv is set.
struct PpoBatch {
  Mat logits;  // (B, A) fresh policy logits
  Vec values;  // (B) fresh critic values
  std::vector<int> actions;
  Vec old_logp;
  Vec old_values;
  Vec advantages;
  Vec returns;
};

struct PpoLosses {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total = 0.0;  // policy - ent_coef * entropy + vf_coef * value
  double approx_kl = 0.0;
  double clipfrac = 0.0;
};

// dlogits / dvalues (optional) receive the gradients of `total`.
PpoLosses ppo_losses(const PpoBatch& b, const PpoConfig& cfg, Mat* dlogits = nullptr,
                     Vec* dvalues = nullptr);

struct PpoUpdateStats {
  PpoLosses losses;       // from the last minibatch of the update
  double grad_norm = 0.0; // pre-clip global norm, last minibatch
  int minibatches = 0;
};

struct PpoRunStats {
  long long steps = 0;
  int episodes = 0;
  int updates = 0;
  double mean_recent_return = 0.0;  // episodes finished during the last rollout
};

struct PpoEvalOut {
  double mean_return = 0.0;
  double se_return = 0.0;
  long long steps = 0;
  int episodes = 0;
};

class PpoTrainer {
 public:
  PpoTrainer(int state_dim, int num_actions, const PpoConfig& cfg, uint64_t seed);

  Vec policy_probs(const Vec& state);
  double value(const Vec& state);
  int act_sample(const Vec& state, Rng& rng, double* logp = nullptr, double* val = nullptr);
  int act_greedy(const Vec& state);

  // One gradient step on a frozen minibatch (forward, loss, backward,
  // global-norm clip, Adam). train() composes this; tests drive it directly.
  PpoLosses update_minibatch(const Mat& states, const std::vector<int>& actions,
                             const Vec& old_logp, const Vec& old_values, const Vec& advantages,
                             const Vec& returns, double* grad_norm = nullptr);

  // Rollout/update loop until cfg.total_timesteps. Writes one CSV row per
  // update when metrics_path is non-empty.
  PpoRunStats train(const std::function<EnvPtr()>& make_env, const std::string& metrics_path = "");

  PpoEvalOut evaluate(const std::function<EnvPtr()>& make_env, int episodes, uint64_t seed);

  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  Adam& opt() { return opt_; }
  const PpoConfig& config() const { return cfg_; }
  void visit(const ParamVisitor& fn);

 private:
  PpoConfig cfg_;
  int state_dim_ = 0;
  int num_actions_ = 0;
  Mlp actor_, critic_;
  Adam opt_;
  Rng rng_;  // action sampling + minibatch shuffling during train()
  uint64_t seed_ = 0;
};

void capture_ppo(const std::string& prefix, PpoTrainer& trainer, Checkpoint& ckpt);
void restore_ppo(const std::string& prefix, PpoTrainer& trainer, const Checkpoint& ckpt);

}  // namespace rbrl
