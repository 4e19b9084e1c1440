#pragma once

// Seasonal heat-alert issuance under a fixed season budget. Each day the
// agent sees the heat index, remaining budget, calendar position, and the
// recent alert history, then decides whether to issue an alert. Alert impact
// decays with consecutive-alert fatigue; issuing with an empty budget is
// coerced to no-alert and penalized.

#include "rbrl/env.hpp"

namespace rbrl {

struct HeatConfig {
  int season_length = 90;
  int budget = 10;
  int history_window = 14;
  double alert_effect = 1.0;       // base effectiveness multiplier
  double streak_decay = 0.8;       // per-consecutive-day fatigue factor
  double overspend_penalty = -1.0; // reward when issuing with no budget left
  int max_episode_steps = 32;
  double discount = 0.95;

  // Weather model. "synthetic": sinusoidal seasonal mean plus AR(1) residual,
  // clipped to [0, 1]. "replay": heat indices read from a CSV column.
  std::string weather_mode = "synthetic";
  double weather_base = 0.55;
  double weather_amp = 0.25;
  double weather_period = 90.0;
  double weather_phase = 0.0;
  double weather_ar = 0.8;
  double weather_noise = 0.06;
  std::string weather_csv;              // path, replay mode only
  std::string weather_column = "heat_index";

  void validate() const;
};

class HeatAlertsEnv : public Environment {
 public:
  explicit HeatAlertsEnv(const HeatConfig& cfg);

  const EnvSpec& spec() const override { return spec_; }
  NumericState reset(uint64_t seed) override;
  StepOutcome step(int action) override;
  const NumericState& state() const override { return cur_; }
  BudgetStatus budget() const override;

  std::string task_text() const override;
  std::string action_space_text() const override;
  std::string action_format_text() const override { return "{\"alert\": <0 or 1>}"; }
  std::string action_text(int action) const override;
  std::string describe_state(const NumericState& s) const override;
  std::vector<std::string> parse_keys() const override { return {"alert", "issue", "action"}; }
  std::vector<RuleText> example_rules() const override;

  // Deterministic seasonal mean for a given day, exposed so tests can
  // deseasonalize synthetic weather without duplicating the formula.
  double seasonal_component(int day) const;
  double risk(double heat_index) const { return heat_index * heat_index; }
  // Trailing run of consecutive alerts in a history vector (most recent first).
  static int streak_of(const std::vector<int>& history);

  const HeatConfig& config() const { return cfg_; }
  double current_heat() const { return heat_; }
  int day() const { return day_; }
  int remaining_budget() const { return remaining_; }

 private:
  NumericState encode() const;
  void advance_weather();

  HeatConfig cfg_;
  EnvSpec spec_;
  std::vector<double> replay_series_;
  double heat_ = 0.0;
  double residual_ = 0.0;
  int day_ = 0;        // day within the season
  int remaining_ = 0;  // alerts left
  std::vector<int> history_;  // most recent day first
  NumericState cur_;
  Rng rng_;
};

}  // namespace rbrl
