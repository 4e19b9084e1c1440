#pragma once

// Environment contract shared by the allocation simulators. Environments are
// numeric MDPs that additionally know how to describe themselves in text
// (task, action space, state) and how to parse an action out of free-form
// text, so a language model can sit in the decision loop.

#include "rbrl/common.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rbrl {

struct EnvSpec {
  std::string id;
  int state_dim = 0;
  int num_actions = 0;
  int max_episode_steps = 32;
  double discount = 0.95;

  void validate() const;
};

struct NumericState {
  Vec values;
  int step_index = 0;
};

struct BudgetStatus {
  double spent = 0.0;
  double limit = 0.0;
  std::string text;  // one-line summary suitable for a prompt
};

struct StepOutcome {
  NumericState next_state;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  std::string note;  // event annotations: removals, overrides, coercions

  bool done() const { return terminated || truncated; }
};

// Rule triple as exchanged with the language side; environments provide a
// few canned examples used to pad malformed generations.
struct RuleText {
  std::string background;
  std::string rule_statement;
  std::string state_relevance;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual NumericState reset(uint64_t seed) = 0;
  // Throws std::out_of_range on an invalid action id; state is untouched.
  virtual StepOutcome step(int action) = 0;
  virtual const NumericState& state() const = 0;
  virtual BudgetStatus budget() const = 0;

  // --- language interface ---------------------------------------------------
  virtual std::string task_text() const = 0;
  virtual std::string action_space_text() const = 0;
  // Format hint given to the model, e.g. {"device": <id>}.
  virtual std::string action_format_text() const = 0;
  // Canonical rendering of a concrete action in that same format.
  virtual std::string action_text(int action) const = 0;
  // Pure function of the numeric state: equal states yield identical text.
  virtual std::string describe_state(const NumericState& s) const = 0;
  // Structured keys the action parser should look for ("device", "alert"...)
  virtual std::vector<std::string> parse_keys() const = 0;
  virtual std::vector<RuleText> example_rules() const = 0;

  // Optimal action when the environment knows it (diagnostics only).
  virtual std::optional<int> oracle_action(const NumericState&) const { return std::nullopt; }

  // Extracts an in-range action id from model text: last structured-key match
  // wins; otherwise a unique in-range bare integer; otherwise failure.
  std::optional<int> parse_action(const std::string& text) const;
};

using EnvPtr = std::unique_ptr<Environment>;

}  // namespace rbrl
