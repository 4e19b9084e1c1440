#pragma once

// Language gateway: renders prompt templates, calls an LLM backend, and
// parses the replies back into typed values (thoughts, rule sets, actions,
// judge scores, explanations, comparison verdicts). Content failures degrade
// per a fixed policy — pad rules, fall back to a random feasible action,
// score unparseable judgments as zero — and every degradation is counted.

#include "rbrl/common.hpp"
#include "rbrl/env.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace rbrl {

struct PromptBundle {
  std::string task;
  std::string state_text;
  std::string actions;
  std::string constraints;
};

struct RuleSet {
  std::vector<RuleText> rules;
  bool padded = false;  // entries were filled from environment examples
};

struct JudgeScores {
  int er1 = 0;
  int er2 = 0;
  int er3 = 0;
  bool unparsed = false;

  double rule_reward() const { return (er1 + er2 + er3) / 3.0; }
};

enum class CompareVerdict { kA, kB, kTie };

struct CompletionRequest {
  std::string prompt;
  double temperature = 0.7;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  // Returns the raw completion text; throws TransportError when the backend
  // cannot produce one (after its own retries).
  virtual std::string complete(const CompletionRequest& req) = 0;
  // Re-seeds any internal randomness; called at every episode start so that
  // episodes replay from their logged seeds. No-op for remote backends.
  virtual void seed_episode(uint64_t seed) { (void)seed; }
  virtual std::string name() const = 0;
};

struct GatewayConfig {
  int num_rules = 5;
  int max_retries = 3;
  double temperature = 0.7;
  std::string prompts_dir;  // optional override of the embedded templates

  void validate() const;
};

struct GatewayStats {
  long long action_fallbacks = 0;
  long long padded_rule_sets = 0;
  long long judge_unparsed = 0;
  long long select_fallbacks = 0;
};

// Human-readable rendering of a rule used inside prompts.
std::string rule_display(const RuleText& rule);
// Single-rule JSON rendering (the same schema the generator must emit).
std::string rule_json(const RuleText& rule);

class Gateway {
 public:
  Gateway(const GatewayConfig& cfg, std::shared_ptr<LlmBackend> backend);

  PromptBundle bundle(const Environment& env) const;
  PromptBundle bundle(const Environment& env, const NumericState& s) const;

  std::string thought(const PromptBundle& p);
  RuleSet rules(const PromptBundle& p, const std::string& thought, const Environment& env);
  // Candidate analyses for the thought-level variant (no rule schema).
  std::vector<std::string> candidates(const PromptBundle& p, const Environment& env);
  int action(const PromptBundle& p, const std::string& thought, const RuleText& rule,
             const Environment& env, Rng& fallback_rng, bool* fallback_used = nullptr);
  int action_from_thought(const PromptBundle& p, const std::string& thought,
                          const Environment& env, Rng& fallback_rng,
                          bool* fallback_used = nullptr);
  // Backend-chosen rule index (baseline without a learned policy).
  int select_rule(const PromptBundle& p, const std::string& thought, const RuleSet& rs,
                  Rng& fallback_rng, bool* fallback_used = nullptr);
  std::string explanation(const PromptBundle& p, const std::string& thought,
                          const RuleText& rule, int action_id, const Environment& env);
  // ER1/ER2 are asked without revealing the action; ER3 with it. Two calls.
  JudgeScores judge(const PromptBundle& p, const RuleText& rule, int action_id,
                    const Environment& env);
  // Order-debiased pairwise comparison: asked twice with sides swapped;
  // disagreement (or transport failure) resolves to a tie.
  CompareVerdict compare(const std::string& task, const std::string& state_text,
                         const std::string& a, const std::string& b);
  // Asks whether an explanation cites facts absent from the given task and
  // state. Transport failures resolve to false.
  bool hallucination(const std::string& task, const std::string& state_text,
                     const std::string& explanation);

  // Full rendered prompt for a given call, exposed for logging and surveys.
  std::string render(const std::string& template_name,
                     const std::map<std::string, std::string>& vars) const;
  const std::string& template_text(const std::string& name) const;
  // SHA-256 over all template names and bodies; recorded in run metadata.
  std::string templates_hash() const;

  LlmBackend& backend() { return *backend_; }
  const GatewayStats& stats() const { return stats_; }
  const GatewayConfig& config() const { return cfg_; }

 private:
  std::string call(const std::string& rendered);

  GatewayConfig cfg_;
  std::shared_ptr<LlmBackend> backend_;
  std::map<std::string, std::string> templates_;
  GatewayStats stats_;
};

}  // namespace rbrl
