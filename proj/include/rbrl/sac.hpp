#pragma once

// Discrete soft actor-critic over a variable set of candidate rules. The
// actor and both critics are attention networks scoring each rule against
// the current state; expectations over the categorical policy are computed
// in closed form, so no reparameterization is needed. Targets use the
// minimum of two target critics with an entropy bonus; the temperature is
// optionally tuned toward a fixed fraction of maximum entropy.

#include "rbrl/nets.hpp"

#include <vector>

namespace rbrl {

struct Transition {
  Vec state;       // numeric environment state
  Mat rules;       // (num_rules, embed_dim) candidate-rule embeddings
  int chosen = 0;  // index of the rule the policy picked
  double reward = 0.0;  // combined environment + rule reward
  bool done = false;    // true termination (not a time-limit truncation)
  Vec next_state;
  Mat next_rules;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);

  void add(Transition t);
  int size() const { return size_; }
  int capacity() const { return capacity_; }
  const Transition& at(int i) const { return data_[i]; }
  // Uniform with replacement.
  std::vector<int> sample_indices(int batch, Rng& rng) const;

 private:
  std::vector<Transition> data_;
  int capacity_ = 0;
  int next_ = 0;
  int size_ = 0;
};

struct SacConfig {
  double gamma = 0.95;
  double tau = 1.0;  // hard sync by default
  int batch_size = 16;
  int buffer_size = 4096;
  int learning_starts = 256;
  double policy_lr = 1e-4;
  double q_lr = 1e-4;
  double alpha_lr = 1e-4;
  int updates_per_step = 4;  // critic+actor update pairs per environment step
  int target_network_frequency = 64;
  double alpha = 0.01;
  bool autotune = true;
  double target_entropy_scale = 0.89;  // fraction of log(num_rules)

  void validate() const;
};

struct TrainMetrics {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha_loss = 0.0;
  double entropy = 0.0;
  double alpha = 0.0;
  int updates = 0;
};

class SacTrainer {
 public:
  SacTrainer(const NetConfig& net_cfg, const SacConfig& cfg, uint64_t seed);

  // Inference-mode policy over the candidate rules.
  Vec policy_probs(const Vec& state, const Mat& rules);
  int act_sample(const Vec& state, const Mat& rules, Rng& rng);
  int act_greedy(const Vec& state, const Mat& rules);

  // Bellman targets y = r + gamma (1 - done) V(s'), with
  // V(s') = sum_i pi_i (min_j Qbar_j(s', i) - alpha log pi_i).
  Vec compute_targets(const std::vector<const Transition*>& batch);

  // Mean squared error of the chosen rule's Q against fixed targets y,
  // evaluated through both critics; accumulates their parameter gradients
  // when with_grads is set. train_step composes this; gradient checks drive
  // it directly.
  double critic_loss_grads(const std::vector<const Transition*>& batch, const Vec& y,
                           bool with_grads);
  // Exact expectation of alpha log pi - min Q under the current policy;
  // accumulates actor parameter gradients when with_grads is set.
  double actor_loss_grads(const std::vector<const Transition*>& batch, double* entropy_out,
                          bool with_grads);

  // One environment step's worth of training (no-op until the buffer holds
  // learning_starts transitions). Counts steps and hard-syncs the targets
  // on schedule.
  TrainMetrics train_step(const ReplayBuffer& buf, Rng& rng);

  void sync_targets(double tau);
  double alpha() const;
  double target_entropy() const { return target_entropy_; }

  AttentionNet& actor() { return actor_; }
  AttentionNet& q1() { return q1_; }
  AttentionNet& q2() { return q2_; }
  AttentionNet& q1_target() { return q1_target_; }
  AttentionNet& q2_target() { return q2_target_; }
  Param& log_alpha() { return log_alpha_; }
  Adam& actor_opt() { return actor_opt_; }
  Adam& q_opt() { return q_opt_; }
  Adam& alpha_opt() { return alpha_opt_; }

  long long steps() const { return steps_; }
  void set_steps(long long s) { steps_ = s; }
  const SacConfig& config() const { return cfg_; }

  // Visits every learnable/owned tensor (including the targets and the
  // temperature) for checkpointing.
  void visit(const ParamVisitor& fn);

 private:
  SacConfig cfg_;
  double target_entropy_ = 0.0;
  AttentionNet actor_, q1_, q2_, q1_target_, q2_target_;
  Param log_alpha_;
  Adam actor_opt_, q_opt_, alpha_opt_;
  long long steps_ = 0;
};

}  // namespace rbrl
