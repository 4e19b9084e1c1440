#include "rbrl/toy_env.hpp"

#include "rbrl/text.hpp"

#include <stdexcept>

namespace rbrl {

void ToyConfig::validate() const {
  if (num_positions < 2) throw ConfigError("toy: need at least 2 positions");
  if (num_actions < 2) throw ConfigError("toy: need at least 2 actions");
  if (slip < 0.0 || slip > 1.0) throw ConfigError("toy: slip must lie in [0, 1]");
  if (optimal_offset < 0) throw ConfigError("toy: optimal_offset must be >= 0");
  if (max_episode_steps <= 0) throw ConfigError("toy: max_episode_steps must be positive");
}

ToyEnv::ToyEnv(const ToyConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  spec_.id = "toy";
  spec_.state_dim = cfg_.num_positions;
  spec_.num_actions = cfg_.num_actions;
  spec_.max_episode_steps = cfg_.max_episode_steps;
  spec_.discount = cfg_.discount;
  spec_.validate();
  cur_ = encode(0, 0);
}

NumericState ToyEnv::encode(int position, int step_index) const {
  NumericState s;
  s.values = Vec::Zero(cfg_.num_positions);
  s.values(position) = 1.0;
  s.step_index = step_index;
  return s;
}

int ToyEnv::position_of(const NumericState& s) const {
  for (int i = 0; i < s.values.size(); ++i) {
    if (s.values(i) > 0.5) return i;
  }
  throw std::invalid_argument("toy: state has no active position");
}

NumericState ToyEnv::reset(uint64_t seed) {
  rng_.seed(derive_seed(seed, 0x70'59));
  position_ = rng_.uniform_int(0, cfg_.num_positions - 1);
  cur_ = encode(position_, 0);
  return cur_;
}

double ToyEnv::reward_for(int position, int action) const {
  return action == (position + cfg_.optimal_offset) % cfg_.num_actions ? 1.0 : 0.0;
}

Vec ToyEnv::transition_pmf(int position, int action) const {
  const int S = cfg_.num_positions;
  Vec p = Vec::Constant(S, cfg_.slip / S);
  p((position + 1 + action) % S) += 1.0 - cfg_.slip;
  return p;
}

StepOutcome ToyEnv::step(int action) {
  if (action < 0 || action >= cfg_.num_actions)
    throw std::out_of_range("toy: action " + std::to_string(action) + " outside [0, " +
                            std::to_string(cfg_.num_actions) + ")");
  StepOutcome out;
  out.reward = reward_for(position_, action);
  if (rng_.uniform() < cfg_.slip) {
    position_ = rng_.uniform_int(0, cfg_.num_positions - 1);
  } else {
    position_ = (position_ + 1 + action) % cfg_.num_positions;
  }
  cur_ = encode(position_, cur_.step_index + 1);
  out.next_state = cur_;
  out.truncated = cur_.step_index >= cfg_.max_episode_steps;
  return out;
}

BudgetStatus ToyEnv::budget() const {
  BudgetStatus b;
  b.spent = 0.0;
  b.limit = static_cast<double>(cfg_.max_episode_steps);
  b.text = "No consumable budget; every action is free.";
  return b;
}

std::string ToyEnv::task_text() const {
  return "You control a token moving around a ring of " + std::to_string(cfg_.num_positions) +
         " positions. Each step you pick one of " + std::to_string(cfg_.num_actions) +
         " actions; exactly one action earns a point at each position, and the rewarded "
         "action depends on the current position. The token then shifts around the ring.";
}

std::string ToyEnv::action_space_text() const {
  return "Integers 0 through " + std::to_string(cfg_.num_actions - 1) +
         ", each naming one of the available moves.";
}

std::string ToyEnv::action_text(int action) const {
  return "{\"action\": " + std::to_string(action) + "}";
}

std::string ToyEnv::describe_state(const NumericState& s) const {
  return "Position " + std::to_string(position_of(s)) + " of " +
         std::to_string(cfg_.num_positions) + ".";
}

std::optional<int> ToyEnv::oracle_action(const NumericState& s) const {
  return (position_of(s) + cfg_.optimal_offset) % cfg_.num_actions;
}

std::vector<RuleText> ToyEnv::example_rules() const {
  std::vector<RuleText> out;
  for (int a = 0; a < std::min(2, cfg_.num_actions); ++a) {
    RuleText r;
    r.background = "Each position rewards exactly one move.";
    r.rule_statement = "Choose action " + std::to_string(a) + " when it matches the position.";
    r.state_relevance = "Applies when the rewarded move is " + std::to_string(a) + ".";
    out.push_back(r);
  }
  return out;
}

}  // namespace rbrl
