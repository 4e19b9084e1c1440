#pragma once

// Orchestration: ties an environment, a language gateway, an embedder, and
// the SAC trainer into the full decision loop (thought -> candidate rules ->
// selection -> action -> judge -> combined reward -> replay buffer), with
// parallel environment workers, JSONL step logging, CSV metrics, and
// deterministic evaluation. Several baseline variants reuse the same loop
// with parts swapped out or disabled.

#include "rbrl/embedding.hpp"
#include "rbrl/env.hpp"
#include "rbrl/gateway.hpp"
#include "rbrl/sac.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace rbrl {

enum class Variant {
  kRbrl,        // learned rule selection, judged rules, SAC training
  kTbrl,        // learned selection over free-form analyses, no judging
  kRulesOnly,   // backend picks the rule; no learning
  kCot,         // free-form analysis straight to an action; no rules
  kRandomRule,  // uniform rule choice; no learning
};

Variant variant_from_string(const std::string& s);
std::string variant_to_string(Variant v);
bool variant_trains(Variant v);
bool variant_uses_rules(Variant v);

struct AgentConfig {
  Variant variant = Variant::kRbrl;
  int num_envs = 4;
  double rule_reward_coef = 1.0;
  long long total_env_steps = 2048;
  uint64_t seed = 1;
  std::string log_path;      // JSONL episode/step log; empty disables
  std::string metrics_path;  // per-step CSV; empty disables
  int explain_every = 0;     // generate an explanation every N global steps

  void validate() const;
};

struct StepRecord {
  int env_id = 0;
  long long global_step = 0;
  long long episode = 0;
  int step_in_episode = 0;
  std::string state_text;
  std::string thought;
  std::vector<RuleText> rules;
  int chosen = -1;
  int action = 0;
  bool action_fallback = false;
  JudgeScores judge;
  double rule_reward = 0.0;
  double env_reward = 0.0;
  double combined_reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  std::string explanation;
};

struct EvalResult {
  double mean_return = 0.0;
  double se_return = 0.0;
  double mean_env_return = 0.0;
  double mean_rule_reward = 0.0;
  double mean_er1 = 0.0, mean_er2 = 0.0, mean_er3 = 0.0;
  double optimal_rate = 0.0;  // fraction of steps matching the env oracle
  long long steps = 0;
  int episodes = 0;
  std::vector<StepRecord> records;
};

using EnvFactory = std::function<EnvPtr()>;
using BackendFactory = std::function<std::shared_ptr<LlmBackend>()>;

class Agent {
 public:
  Agent(const AgentConfig& cfg, const GatewayConfig& gw_cfg, const EmbeddingConfig& emb_cfg,
        NetConfig net_cfg, const SacConfig& sac_cfg, EnvFactory env_factory,
        BackendFactory backend_factory);
  ~Agent();

  // Runs the training loop for cfg.total_env_steps environment steps
  // (spread over the workers). Baselines without a learned component run
  // the same loop minus the trainer.
  void train();

  // Deterministic greedy (or sampled) evaluation on fresh environments.
  EvalResult evaluate(int episodes, uint64_t eval_seed, bool greedy = true,
                      bool with_explanations = false);

  SacTrainer& trainer() { return *trainer_; }
  ReplayBuffer& buffer() { return *buffer_; }
  Gateway& gateway(int worker) { return *gateways_.at(worker); }
  const AgentConfig& config() const { return cfg_; }
  const GatewayStats combined_gateway_stats() const;
  long long global_steps() const { return global_step_; }

 private:
  struct Worker;
  struct PhaseA;  // language phase artifacts (parallel)
  struct PhaseC;  // action/judge artifacts (parallel)

  PhaseA language_phase(Worker& w);
  PhaseC action_phase(Worker& w, const PhaseA& a, int chosen);
  Mat embed_rules(const std::vector<RuleText>& rules);
  Mat embed_texts(const std::vector<std::string>& texts);
  void start_episode(Worker& w);

  AgentConfig cfg_;
  GatewayConfig gw_cfg_;
  EmbeddingConfig emb_cfg_;
  NetConfig net_cfg_;
  SacConfig sac_cfg_;
  EnvFactory env_factory_;
  BackendFactory backend_factory_;

  std::unique_ptr<Embedder> embedder_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::vector<std::shared_ptr<Gateway>> gateways_;
  std::unique_ptr<SacTrainer> trainer_;
  std::unique_ptr<ReplayBuffer> buffer_;
  Rng policy_rng_;
  Rng train_rng_;
  long long global_step_ = 0;
};

}  // namespace rbrl
