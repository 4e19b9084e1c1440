#pragma once

// Small ring-world used for diagnostics: every position has exactly one
// rewarded action, offset by a fixed amount, and transitions are a
// deterministic shift with a slip probability. The transition law is exposed
// in closed form so tests can compare empirical and analytic distributions.

#include "rbrl/env.hpp"

namespace rbrl {

struct ToyConfig {
  int num_positions = 5;
  int num_actions = 5;
  int optimal_offset = 2;  // rewarded action at position p is (p + offset) % num_actions
  double slip = 0.2;       // probability the next position is uniform instead of the shift
  int max_episode_steps = 32;
  double discount = 0.95;

  void validate() const;
};

class ToyEnv : public Environment {
 public:
  explicit ToyEnv(const ToyConfig& cfg);

  const EnvSpec& spec() const override { return spec_; }
  NumericState reset(uint64_t seed) override;
  StepOutcome step(int action) override;
  const NumericState& state() const override { return cur_; }
  BudgetStatus budget() const override;

  std::string task_text() const override;
  std::string action_space_text() const override;
  std::string action_format_text() const override { return "{\"action\": <id>}"; }
  std::string action_text(int action) const override;
  std::string describe_state(const NumericState& s) const override;
  std::vector<std::string> parse_keys() const override { return {"action"}; }
  std::vector<RuleText> example_rules() const override;
  std::optional<int> oracle_action(const NumericState& s) const override;

  // Closed-form law: P(next position | position, action) over positions.
  Vec transition_pmf(int position, int action) const;
  double reward_for(int position, int action) const;
  int position_of(const NumericState& s) const;
  const ToyConfig& config() const { return cfg_; }

 private:
  NumericState encode(int position, int step_index) const;

  ToyConfig cfg_;
  EnvSpec spec_;
  NumericState cur_;
  int position_ = 0;
  Rng rng_;
};

}  // namespace rbrl
