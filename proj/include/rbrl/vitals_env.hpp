#pragma once

// Postpartum vital-sign monitoring: a fixed pool of wearable devices, one new
// patient arriving per step, and patients resident for a fixed number of
// steps. The agent picks a device id each step; choosing an occupied device
// removes its current wearer, whose remaining trajectory is simulated
// immediately under passive dynamics and charged to this step's reward.

#include "rbrl/env.hpp"

#include <array>
#include <optional>

namespace rbrl {

struct VitalRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct VitalsConfig {
  int num_devices = 5;
  int residency = 10;  // steps a patient stays in the unit
  int max_episode_steps = 32;
  double discount = 0.95;

  // Per-vital order everywhere: pulse rate, respiratory rate, SpO2.
  std::array<VitalRange, 3> normal_range = {{{60.0, 100.0}, {12.0, 20.0}, {94.0, 100.0}}};
  std::array<double, 3> cost_scale = {10.0, 5.0, 2.0};
  double cost_exponent_cap = 10.0;

  // AR(1) mean reversion: next = ar * current + (1 - ar) * long_run + noise.
  std::array<double, 3> ar_coef = {0.9, 0.9, 0.9};
  std::array<double, 3> long_run_mean = {80.0, 16.0, 97.0};
  // Row-major 3x3 noise covariance; must be symmetric positive definite.
  std::array<double, 9> noise_cov = {16.0, 0.6, -0.4, 0.6, 2.25, -0.15, -0.4, -0.15, 1.0};

  // Arrival distribution (independent normals, one per vital).
  std::array<double, 3> init_mean = {90.0, 18.0, 96.5};
  std::array<double, 3> init_std = {15.0, 4.0, 2.0};

  // Probability an out-of-range vital is corrected while the patient wears a
  // device; the complement models the clinician not responding in time.
  double intervention_success = 0.7;
  // Corrections land just inside the violated bound, uniformly within this
  // fraction of the range width.
  double inward_offset_frac = 0.2;

  // Added to the reward when an occupied device is chosen while a free one
  // was available (outside warm-up).
  double removal_penalty = -5.0;

  void validate() const;
};

struct Patient {
  Eigen::Vector3d last = Eigen::Vector3d::Zero();
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d m2 = Eigen::Vector3d::Zero();  // Welford sum of squared deviations
  int obs_count = 0;
  int time_worn = 0;
  long long id = 0;

  Eigen::Vector3d running_std() const;
  void observe(const Eigen::Vector3d& x);
};

class VitalsEnv : public Environment {
 public:
  explicit VitalsEnv(const VitalsConfig& cfg);

  const EnvSpec& spec() const override { return spec_; }
  NumericState reset(uint64_t seed) override;
  StepOutcome step(int action) override;
  const NumericState& state() const override { return cur_; }
  BudgetStatus budget() const override;

  std::string task_text() const override;
  std::string action_space_text() const override;
  std::string action_format_text() const override { return "{\"device\": <id>}"; }
  std::string action_text(int action) const override;
  std::string describe_state(const NumericState& s) const override;
  std::vector<std::string> parse_keys() const override { return {"device", "action"}; }
  std::vector<RuleText> example_rules() const override;

  // Dynamics primitives, exposed so tests can drive them directly.
  void passive_transition(Patient& p, Rng& rng) const;
  void active_transition(Patient& p, Rng& rng) const;
  double deviation_cost(const Patient& p) const;
  Patient sample_arrival(Rng& rng, long long id) const;
  // Discounted cost of simulating a removed patient's remaining stay.
  double removal_future_cost(Patient p, Rng& rng) const;

  const VitalsConfig& config() const { return cfg_; }
  const std::optional<Patient>& slot(int device) const { return slots_[device]; }
  bool warmed_up() const { return warm_up_done_; }

 private:
  NumericState encode() const;
  int lowest_free() const;  // -1 when full

  VitalsConfig cfg_;
  EnvSpec spec_;
  Eigen::Matrix3d noise_chol_;  // lower Cholesky factor of noise_cov
  std::vector<std::optional<Patient>> slots_;
  bool warm_up_done_ = false;
  long long next_patient_id_ = 0;
  NumericState cur_;
  Rng rng_;
};

}  // namespace rbrl
