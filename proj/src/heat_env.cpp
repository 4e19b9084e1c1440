#include "rbrl/heat_env.hpp"

#include "rbrl/csv.hpp"
#include "rbrl/text.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace rbrl {

namespace {
const char* kWeekdays[7] = {"Monday",   "Tuesday", "Wednesday", "Thursday",
                            "Friday",   "Saturday", "Sunday"};
}

void HeatConfig::validate() const {
  if (season_length < 1) throw ConfigError("heat: season_length must be >= 1");
  if (budget < 0) throw ConfigError("heat: budget must be >= 0");
  if (history_window < 1) throw ConfigError("heat: history_window must be >= 1");
  if (streak_decay < 0.0 || streak_decay > 1.0)
    throw ConfigError("heat: streak_decay must lie in [0, 1]");
  if (alert_effect < 0.0) throw ConfigError("heat: alert_effect must be >= 0");
  if (max_episode_steps < 1) throw ConfigError("heat: max_episode_steps must be >= 1");
  if (weather_mode != "synthetic" && weather_mode != "replay")
    throw ConfigError("heat: weather_mode must be 'synthetic' or 'replay'");
  if (weather_mode == "replay" && weather_csv.empty())
    throw ConfigError("heat: replay mode requires weather_csv");
  if (weather_mode == "synthetic") {
    if (weather_period <= 0.0) throw ConfigError("heat: weather_period must be positive");
    if (weather_ar < 0.0 || weather_ar >= 1.0)
      throw ConfigError("heat: weather_ar must lie in [0, 1)");
    if (weather_noise < 0.0) throw ConfigError("heat: weather_noise must be >= 0");
  }
}

HeatAlertsEnv::HeatAlertsEnv(const HeatConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.weather_mode == "replay") {
    auto table = CsvTable::read(cfg_.weather_csv);
    replay_series_ = table.column(cfg_.weather_column);
    if (replay_series_.empty()) throw ConfigError("heat: weather csv has no rows");
    for (double v : replay_series_) {
      if (!(v >= 0.0 && v <= 1.0))
        throw ConfigError("heat: replayed heat indices must lie in [0, 1]");
    }
  }
  spec_.id = "heat";
  spec_.state_dim = 10 + cfg_.history_window;
  spec_.num_actions = 2;
  spec_.max_episode_steps = cfg_.max_episode_steps;
  spec_.discount = cfg_.discount;
  spec_.validate();
  history_.assign(cfg_.history_window, 0);
  remaining_ = cfg_.budget;
  cur_ = encode();
}

double HeatAlertsEnv::seasonal_component(int day) const {
  return cfg_.weather_base +
         cfg_.weather_amp *
             std::sin(2.0 * std::numbers::pi * (day + cfg_.weather_phase) / cfg_.weather_period);
}

int HeatAlertsEnv::streak_of(const std::vector<int>& history) {
  int k = 0;
  for (int bit : history) {
    if (bit != 1) break;
    ++k;
  }
  return k;
}

NumericState HeatAlertsEnv::reset(uint64_t seed) {
  rng_.seed(derive_seed(seed, 0x68'65));
  day_ = 0;
  remaining_ = cfg_.budget;
  history_.assign(cfg_.history_window, 0);
  if (cfg_.weather_mode == "replay") {
    heat_ = replay_series_[0];
  } else {
    const double denom = std::sqrt(1.0 - cfg_.weather_ar * cfg_.weather_ar);
    residual_ = cfg_.weather_noise > 0.0 ? rng_.normal(0.0, cfg_.weather_noise / denom) : 0.0;
    heat_ = std::clamp(seasonal_component(0) + residual_, 0.0, 1.0);
  }
  cur_ = encode();
  cur_.step_index = 0;
  return cur_;
}

void HeatAlertsEnv::advance_weather() {
  if (cfg_.weather_mode == "replay") {
    if (day_ < static_cast<int>(replay_series_.size())) heat_ = replay_series_[day_];
    return;
  }
  residual_ = cfg_.weather_ar * residual_ + rng_.normal(0.0, cfg_.weather_noise);
  heat_ = std::clamp(seasonal_component(day_) + residual_, 0.0, 1.0);
}

StepOutcome HeatAlertsEnv::step(int action) {
  if (action < 0 || action > 1)
    throw std::out_of_range("heat: action " + std::to_string(action) + " outside {0, 1}");
  StepOutcome out;
  std::ostringstream note;

  const int streak = streak_of(history_);
  int recorded = 0;
  if (action == 1) {
    if (remaining_ > 0) {
      out.reward = risk(heat_) * cfg_.alert_effect * std::pow(cfg_.streak_decay, streak);
      remaining_ -= 1;
      recorded = 1;
    } else {
      out.reward = cfg_.overspend_penalty;
      note << "alert requested with no budget left; coerced to no-alert and penalized. ";
    }
  } else {
    out.reward = 0.0;
  }
  history_.insert(history_.begin(), recorded);
  history_.resize(cfg_.history_window);

  day_ += 1;
  advance_weather();
  const int next_step = cur_.step_index + 1;
  out.terminated = day_ >= cfg_.season_length;
  out.truncated = !out.terminated && next_step >= cfg_.max_episode_steps;
  if (cfg_.weather_mode == "replay" && !out.terminated &&
      day_ >= static_cast<int>(replay_series_.size())) {
    out.truncated = true;
    note << "weather series exhausted. ";
  }

  cur_ = encode();
  cur_.step_index = next_step;
  out.next_state = cur_;
  out.note = trim(note.str());
  return out;
}

NumericState HeatAlertsEnv::encode() const {
  NumericState s;
  s.values = Vec::Zero(spec_.state_dim);
  s.values(0) = heat_;
  s.values(1) = cfg_.budget > 0 ? static_cast<double>(remaining_) / cfg_.budget : 0.0;
  s.values(2) = static_cast<double>(day_) / cfg_.season_length;
  s.values(3 + day_ % 7) = 1.0;
  for (int i = 0; i < cfg_.history_window; ++i) s.values(10 + i) = history_[i];
  return s;
}

BudgetStatus HeatAlertsEnv::budget() const {
  BudgetStatus b;
  b.spent = cfg_.budget - remaining_;
  b.limit = cfg_.budget;
  b.text = "Remaining alert budget: " + std::to_string(remaining_) + " of " +
           std::to_string(cfg_.budget) + " for the season.";
  return b;
}

std::string HeatAlertsEnv::task_text() const {
  std::ostringstream os;
  os << "You issue public heat alerts for a season of " << cfg_.season_length
     << " days with a budget of " << cfg_.budget
     << " alerts. Issuing an alert on a hot day prevents harm in proportion to the squared "
        "heat index, but alert fatigue shrinks the effect by a factor of "
     << format_fixed(cfg_.streak_decay, 2)
     << " for each immediately preceding consecutive alert day. Issuing with an exhausted "
        "budget is blocked and penalized. The goal is to maximize total prevented harm.";
  return os.str();
}

std::string HeatAlertsEnv::action_space_text() const {
  return "0: issue no alert today. 1: issue a heat alert today (consumes one unit of budget).";
}

std::string HeatAlertsEnv::action_text(int action) const {
  return "{\"alert\": " + std::to_string(action) + "}";
}

std::string HeatAlertsEnv::describe_state(const NumericState& s) const {
  const int day = static_cast<int>(std::lround(s.values(2) * cfg_.season_length));
  int dow = 0;
  for (int i = 0; i < 7; ++i) {
    if (s.values(3 + i) > 0.5) dow = i;
  }
  const int remaining = static_cast<int>(std::lround(s.values(1) * cfg_.budget));
  std::vector<int> hist(cfg_.history_window);
  for (int i = 0; i < cfg_.history_window; ++i) hist[i] = s.values(10 + i) > 0.5 ? 1 : 0;

  std::ostringstream os;
  os << "Day " << day << " of " << cfg_.season_length << " (" << kWeekdays[dow] << ").\n";
  os << "Current heat index: " << format_fixed(s.values(0), 2) << ".\n";
  os << "Remaining alert budget: " << remaining << " of " << cfg_.budget << ".\n";
  os << "Alerts issued over the last " << cfg_.history_window << " day(s), most recent first: ";
  for (int i = 0; i < cfg_.history_window; ++i) os << (i ? ", " : "") << hist[i];
  os << ".\nCurrent consecutive-alert streak: " << streak_of(hist) << " day(s).";
  return os.str();
}

std::vector<RuleText> HeatAlertsEnv::example_rules() const {
  std::vector<RuleText> out;
  out.push_back({"Alerts matter most on the hottest days, and fatigue erodes repeated alerts.",
                 "Issue an alert when the heat index exceeds 0.80 and budget remains.",
                 "Applies when the current heat index is extreme."});
  out.push_back({"Budget spent early cannot cover late-season heat waves.",
                 "Choose no alert when the heat index is below 0.60.",
                 "Applies on mild days."});
  return out;
}

}  // namespace rbrl
