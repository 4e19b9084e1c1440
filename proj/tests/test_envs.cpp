#include "doctest.h"

#include "rbrl/heat_env.hpp"
#include "rbrl/text.hpp"
#include "rbrl/toy_env.hpp"
#include "rbrl/vitals_env.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace rbrl;

// ===========================================================================
// Toy ring world

TEST_CASE("toy: rewarded action is the offset rule, everywhere") {
  ToyConfig cfg;
  cfg.num_positions = 5;
  cfg.num_actions = 5;
  cfg.optimal_offset = 2;
  ToyEnv env(cfg);
  for (int s = 0; s < 5; ++s) {
    for (int a = 0; a < 5; ++a) {
      double want = (a == (s + 2) % 5) ? 1.0 : 0.0;
      CHECK(env.reward_for(s, a) == want);
    }
  }
  NumericState st = env.reset(7);
  CHECK(*env.oracle_action(st) == (env.position_of(st) + 2) % 5);
}

TEST_CASE("toy: transition pmf is a proper distribution and matches samples") {
  ToyConfig cfg;
  cfg.slip = 0.3;
  ToyEnv env(cfg);
  const int s0 = 2, a0 = 1;
  Vec pmf = env.transition_pmf(s0, a0);
  CHECK(pmf.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pmf((s0 + 1 + a0) % cfg.num_positions) ==
        doctest::Approx(1.0 - cfg.slip + cfg.slip / cfg.num_positions));

  // Empirical check: rejection-sample starts at s0, step a0, tally outcomes.
  std::vector<int> counts(cfg.num_positions, 0);
  int n = 0;
  uint64_t seed = 0;
  while (n < 60000) {
    NumericState st = env.reset(seed++);
    if (env.position_of(st) != s0) continue;
    auto out = env.step(a0);
    ++counts[env.position_of(out.next_state)];
    ++n;
  }
  for (int i = 0; i < cfg.num_positions; ++i) {
    double freq = double(counts[i]) / n;
    double se = std::sqrt(pmf(i) * (1 - pmf(i)) / n);
    CHECK(std::fabs(freq - pmf(i)) < 5 * se);
  }
}

TEST_CASE("toy: bad actions are rejected without touching state") {
  ToyEnv env(ToyConfig{});
  NumericState before = env.reset(3);
  CHECK_THROWS_AS(env.step(99), std::out_of_range);
  CHECK_THROWS_AS(env.step(-1), std::out_of_range);
  CHECK((env.state().values - before.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK(env.state().step_index == 0);
}

TEST_CASE("toy: truncates at the step limit and resets deterministically") {
  ToyConfig cfg;
  cfg.max_episode_steps = 4;
  ToyEnv env(cfg);
  env.reset(11);
  for (int i = 0; i < 3; ++i) CHECK_FALSE(env.step(0).done());
  auto last = env.step(0);
  CHECK(last.truncated);
  CHECK_FALSE(last.terminated);

  ToyEnv env2(cfg);
  NumericState a = env.reset(42), b = env2.reset(42);
  CHECK(env.position_of(a) == env2.position_of(b));
  for (int i = 0; i < 4; ++i) {
    auto oa = env.step(i % cfg.num_actions);
    auto ob = env2.step(i % cfg.num_actions);
    CHECK(oa.reward == ob.reward);
    CHECK(env.position_of(oa.next_state) == env2.position_of(ob.next_state));
  }
}

TEST_CASE("toy: text round trips") {
  ToyEnv env(ToyConfig{});
  NumericState st = env.reset(5);
  std::string desc = env.describe_state(st);
  CHECK(desc.find("Position " + std::to_string(env.position_of(st))) == 0);
  for (int a = 0; a < 5; ++a) CHECK(*env.parse_action(env.action_text(a)) == a);
  CHECK(env.parse_action("I will go with {\"action\": 3} here") == 3);
  CHECK_FALSE(env.parse_action("either 1 or 2, hard to say").has_value());
  CHECK_FALSE(env.parse_action("nothing to see").has_value());
}

// ===========================================================================
// Vitals ward

namespace {
VitalsConfig quick_vitals() {
  VitalsConfig cfg;  // defaults are the uganda-like setting
  return cfg;
}

Patient patient_with(double pulse, double resp, double spo2) {
  Patient p;
  p.observe(Eigen::Vector3d(pulse, resp, spo2));
  return p;
}
}  // namespace

TEST_CASE("vitals: deviation cost closed forms") {
  VitalsEnv env(quick_vitals());
  // all in range -> zero
  CHECK(env.deviation_cost(patient_with(80, 16, 97)) == 0.0);
  // pulse 10 over the upper bound with scale 10 -> e^1 - 1, others normal
  CHECK(env.deviation_cost(patient_with(110, 16, 97)) ==
        doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));
  // 5 below the lower bound on respiration, scale 5 -> e^1 - 1
  CHECK(env.deviation_cost(patient_with(80, 7, 97)) ==
        doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));
  // enormous deviation saturates at the exponent cap
  CHECK(env.deviation_cost(patient_with(100000, 16, 97)) ==
        doctest::Approx(std::exp(10.0) - 1.0).epsilon(1e-12));
  // additive across vitals
  double both = env.deviation_cost(patient_with(110, 7, 97));
  CHECK(both == doctest::Approx(2.0 * (std::exp(1.0) - 1.0)).epsilon(1e-12));
}

TEST_CASE("vitals: welford stats equal direct mean and population std") {
  Patient p;
  Rng rng(17);
  std::vector<Eigen::Vector3d> xs;
  for (int i = 0; i < 40; ++i) {
    Eigen::Vector3d x(rng.normal(90, 10), rng.normal(18, 3), rng.normal(96, 1.5));
    xs.push_back(x);
    p.observe(x);
  }
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& x : xs) mean += x;
  mean /= xs.size();
  Eigen::Vector3d var = Eigen::Vector3d::Zero();
  for (const auto& x : xs) var += (x - mean).cwiseProduct(x - mean);
  var /= xs.size();
  CHECK((p.mean - mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((p.running_std() - var.cwiseSqrt()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(p.last == xs.back());
  CHECK(p.obs_count == 40);
}

TEST_CASE("vitals: passive transition has the configured conditional mean") {
  VitalsConfig cfg = quick_vitals();
  VitalsEnv env(cfg);
  const Eigen::Vector3d x0(120.0, 22.0, 93.0);
  const int N = 20000;
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  Rng rng(99);
  for (int i = 0; i < N; ++i) {
    Patient p = patient_with(x0(0), x0(1), x0(2));
    env.passive_transition(p, rng);
    acc += p.last;
  }
  acc /= N;
  for (int v = 0; v < 3; ++v) {
    double expect = cfg.ar_coef[v] * x0(v) + (1.0 - cfg.ar_coef[v]) * cfg.long_run_mean[v];
    double sd = std::sqrt(cfg.noise_cov[v * 3 + v]);
    CHECK(std::fabs(acc(v) - expect) < 4.0 * sd / std::sqrt(double(N)));
  }
}

TEST_CASE("vitals: zero intervention success reduces active to passive exactly") {
  VitalsConfig cfg = quick_vitals();
  cfg.intervention_success = 0.0;
  VitalsEnv env(cfg);
  Patient a = patient_with(130, 25, 90);  // abnormal on all three
  Patient b = a;
  Rng r1(5), r2(5);
  env.active_transition(a, r1);
  env.passive_transition(b, r2);
  // The active path consumed one extra uniform for the gate; distributions
  // match but streams shift, so compare against a stream that also burns one.
  Rng r3(5);
  (void)r3.uniform();
  Patient c = patient_with(130, 25, 90);
  env.passive_transition(c, r3);
  CHECK((a.last - c.last).cwiseAbs().maxCoeff() == 0.0);
  // and statistically b has the same law; just sanity-check finiteness here
  CHECK(std::isfinite(b.last(0)));
}

TEST_CASE("vitals: in-range patients never consume the intervention gate") {
  VitalsConfig cfg = quick_vitals();
  cfg.intervention_success = 1.0;
  VitalsEnv env(cfg);
  Patient a = patient_with(80, 16, 97);  // all normal
  Patient b = a;
  Rng r1(9), r2(9);
  env.active_transition(a, r1);
  env.passive_transition(b, r2);
  CHECK((a.last - b.last).cwiseAbs().maxCoeff() == 0.0);  // identical streams
}

TEST_CASE("vitals: successful intervention pulls abnormal vitals toward range") {
  VitalsConfig cfg = quick_vitals();
  cfg.intervention_success = 1.0;
  VitalsEnv env(cfg);
  const int N = 5000;
  double active_mean = 0.0, passive_mean = 0.0;
  Rng ra(31), rp(32);
  for (int i = 0; i < N; ++i) {
    Patient a = patient_with(140, 16, 97);
    Patient p = patient_with(140, 16, 97);
    env.active_transition(a, ra);
    env.passive_transition(p, rp);
    active_mean += a.last(0);
    passive_mean += p.last(0);
  }
  active_mean /= N;
  passive_mean /= N;
  // Correction lands pulse in [92, 100]; the AR pull keeps the gap > 25.
  CHECK(passive_mean - active_mean > 25.0);
}

TEST_CASE("vitals: monitored stay beats unmonitored stay on cumulative cost") {
  VitalsConfig cfg = quick_vitals();  // success 0.7
  VitalsEnv env(cfg);
  const int N = 3000, horizon = 6;
  double active_total = 0.0, passive_total = 0.0;
  std::vector<double> diffs;
  Rng ra(71), rp(72);
  for (int i = 0; i < N; ++i) {
    Patient a = patient_with(125, 24, 92);
    Patient p = a;
    double ca = 0, cp = 0;
    for (int t = 0; t < horizon; ++t) {
      env.active_transition(a, ra);
      ca += env.deviation_cost(a);
      env.passive_transition(p, rp);
      cp += env.deviation_cost(p);
    }
    active_total += ca;
    passive_total += cp;
    diffs.push_back(cp - ca);
  }
  double mean_diff = (passive_total - active_total) / N;
  double var = 0.0;
  for (double d : diffs) var += (d - mean_diff) * (d - mean_diff);
  var /= (N - 1);
  double se = std::sqrt(var / N);
  CHECK(mean_diff > 3.0 * se);  // active dominates well beyond noise
}

TEST_CASE("vitals: removal future cost equals a hand-rolled discounted rollout") {
  VitalsConfig cfg = quick_vitals();
  cfg.residency = 6;
  VitalsEnv env(cfg);
  Patient p = patient_with(120, 22, 94);
  p.time_worn = 2;  // 4 passive steps remain
  Rng r1(55), r2(55);
  double got = env.removal_future_cost(p, r1);
  double want = 0.0, disc = 1.0;
  Patient q = p;
  for (int j = 0; j < 4; ++j) {
    env.passive_transition(q, r2);
    want += disc * env.deviation_cost(q);
    disc *= cfg.discount;
  }
  CHECK(got == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("vitals: reset seeds one patient on device 0 and warm-up fills the rest") {
  VitalsConfig cfg = quick_vitals();
  VitalsEnv env(cfg);
  NumericState st = env.reset(2024);
  CHECK(st.values(cfg.num_devices * 10 + 0) == 0.0);  // device 0 occupied
  for (int i = 1; i < 5; ++i) CHECK(st.values(cfg.num_devices * 10 + i) == 1.0);
  CHECK_FALSE(env.warmed_up());

  // Keep choosing device 0 (occupied): warm-up must redirect without penalty.
  for (int t = 0; t < 4; ++t) {
    auto out = env.step(0);
    CHECK(out.note.find("warm-up") != std::string::npos);
    CHECK(out.note.find("penalty") == std::string::npos);
  }
  CHECK(env.warmed_up());
  for (int i = 0; i < 5; ++i) CHECK(env.slot(i).has_value());
}

TEST_CASE("vitals: removals, penalties, and device reuse rules") {
  VitalsConfig cfg = quick_vitals();
  VitalsEnv env(cfg);
  env.reset(7);
  for (int t = 0; t < 4; ++t) env.step(0);  // finish warm-up

  // Unit is full: choosing an occupied device removes its wearer, no penalty.
  std::set<long long> device1_ids;
  device1_ids.insert(env.slot(1)->id);
  for (int t = 0; t < 6; ++t) {
    auto out = env.step(1);
    CHECK(out.note.find("removed from device 1") != std::string::npos);
    CHECK(out.note.find("penalty") == std::string::npos);
    // a fresh patient (new id) took the device
    CHECK(device1_ids.count(env.slot(1)->id) == 0);
    device1_ids.insert(env.slot(1)->id);
  }

  // Patient on device 0 has now worn it for 10 steps (4 warm-up + 6 above);
  // she leaves at the start of the next step, freeing device 0. Choosing
  // occupied device 1 while device 0 is free must cost the penalty.
  auto out = env.step(1);
  CHECK(out.note.find("device 0 freed") != std::string::npos);
  CHECK(out.note.find("penalty applied") != std::string::npos);
}

TEST_CASE("vitals: rewards are never positive") {
  VitalsEnv env(quick_vitals());
  env.reset(13);
  Rng rng(5);
  for (int t = 0; t < 64; ++t) {
    auto out = env.step(rng.uniform_int(0, 4));
    CHECK(out.reward <= 0.0);
    CHECK(std::isfinite(out.reward));
    if (out.done()) env.reset(14 + t);
  }
}

TEST_CASE("vitals: trajectories are reproducible per seed") {
  VitalsConfig cfg = quick_vitals();
  VitalsEnv a(cfg), b(cfg), c(cfg);
  a.reset(101);
  b.reset(101);
  c.reset(102);
  bool any_diff = false;
  for (int t = 0; t < 20; ++t) {
    int act = t % 5;
    auto oa = a.step(act), ob = b.step(act), oc = c.step(act);
    CHECK(oa.reward == ob.reward);
    CHECK((oa.next_state.values - ob.next_state.values).cwiseAbs().maxCoeff() == 0.0);
    if (oa.reward != oc.reward) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("vitals: state text follows the device-block format and is pure") {
  VitalsEnv env(quick_vitals());
  NumericState st = env.reset(3);
  std::string text = env.describe_state(st);
  CHECK(text.find("Device 0: Device is currently assigned to a patient") != std::string::npos);
  CHECK(text.find("Device 3: Device is currently free.") != std::string::npos);
  CHECK(text.find("*Pulse rate* - Last value: ") != std::string::npos);
  CHECK(text.find("- Standard deviation/volatility: ") != std::string::npos);
  CHECK(text.find("*Timesteps wearing the device*: 0") != std::string::npos);
  CHECK(env.describe_state(st) == text);  // pure

  // Budget line names the free devices.
  auto b = env.budget();
  CHECK(b.spent == 1.0);
  CHECK(b.limit == 5.0);
  CHECK(b.text.find("4 free") != std::string::npos);
}

TEST_CASE("vitals: action parsing") {
  VitalsEnv env(quick_vitals());
  CHECK(*env.parse_action("{\"device\": 3}") == 3);
  CHECK(*env.parse_action("{`device': 2}") == 2);
  CHECK(*env.parse_action("Assign device 4.") == 4);
  CHECK(*env.parse_action("I pick 1") == 1);
  CHECK(*env.parse_action("Device 9 is invalid so device 1") == 1);
  CHECK_FALSE(env.parse_action("devices are all busy").has_value());
  CHECK_FALSE(env.parse_action("maybe 0, maybe 4").has_value());
  for (int a = 0; a < 5; ++a) CHECK(*env.parse_action(env.action_text(a)) == a);
}

TEST_CASE("vitals: config validation rejects bad settings") {
  VitalsConfig cfg = quick_vitals();
  cfg.normal_range[0] = {100.0, 60.0};
  CHECK_THROWS_AS(VitalsEnv{cfg}, ConfigError);
  cfg = quick_vitals();
  cfg.noise_cov = {1, 0, 0, 0, 1, 0, 0, 0, -1};  // not PSD
  CHECK_THROWS_AS(VitalsEnv{cfg}, ConfigError);
  cfg = quick_vitals();
  cfg.noise_cov[1] = 99.0;  // asymmetric
  CHECK_THROWS_AS(VitalsEnv{cfg}, ConfigError);
  cfg = quick_vitals();
  cfg.intervention_success = 1.5;
  CHECK_THROWS_AS(VitalsEnv{cfg}, ConfigError);
}

// ===========================================================================
// Heat alerts

namespace {
HeatConfig calm_heat() {
  HeatConfig cfg;
  cfg.weather_amp = 0.0;
  cfg.weather_noise = 0.0;
  cfg.weather_base = 0.8;
  return cfg;
}
}  // namespace

TEST_CASE("heat: first alert reward and exact fatigue geometry") {
  HeatConfig cfg = calm_heat();
  cfg.budget = 50;
  HeatAlertsEnv env(cfg);
  env.reset(1);
  const double base = 0.8 * 0.8 * cfg.alert_effect;
  std::vector<double> rewards;
  for (int k = 0; k < 5; ++k) rewards.push_back(env.step(1).reward);
  CHECK(rewards[0] == doctest::Approx(base).epsilon(1e-12));
  for (int k = 1; k < 5; ++k) {
    CHECK(rewards[k] / rewards[k - 1] == doctest::Approx(cfg.streak_decay).epsilon(1e-12));
  }
  // a skipped day resets the streak
  CHECK(env.step(0).reward == 0.0);
  CHECK(env.step(1).reward == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("heat: risk is monotone in the heat index") {
  HeatAlertsEnv env(calm_heat());
  CHECK(env.risk(0.3) < env.risk(0.5));
  CHECK(env.risk(0.99) < env.risk(1.0));
  CHECK(env.risk(0.5) == doctest::Approx(0.25));
}

TEST_CASE("heat: exhausted budget coerces alerts and penalizes") {
  HeatConfig cfg = calm_heat();
  cfg.budget = 2;
  HeatAlertsEnv env(cfg);
  env.reset(3);
  CHECK(env.step(1).reward > 0.0);
  CHECK(env.step(1).reward > 0.0);
  CHECK(env.remaining_budget() == 0);
  auto out = env.step(1);
  CHECK(out.reward == cfg.overspend_penalty);
  CHECK(out.note.find("coerced") != std::string::npos);
  CHECK(env.remaining_budget() == 0);  // never negative
  // the coerced alert is recorded as a quiet day
  CHECK(out.next_state.values(10) == 0.0);
}

TEST_CASE("heat: streak helper counts the leading run") {
  CHECK(HeatAlertsEnv::streak_of({1, 1, 0, 1}) == 2);
  CHECK(HeatAlertsEnv::streak_of({0, 1, 1}) == 0);
  CHECK(HeatAlertsEnv::streak_of({1, 1, 1}) == 3);
  CHECK(HeatAlertsEnv::streak_of({}) == 0);
}

TEST_CASE("heat: noiseless synthetic weather follows its seasonal curve") {
  HeatConfig cfg;
  cfg.weather_noise = 0.0;
  cfg.weather_amp = 0.2;
  cfg.weather_base = 0.5;
  cfg.season_length = 90;
  cfg.max_episode_steps = 90;
  cfg.budget = 90;
  HeatAlertsEnv env(cfg);
  env.reset(4);
  CHECK(env.current_heat() == doctest::Approx(env.seasonal_component(0)).epsilon(1e-12));
  for (int d = 1; d <= 30; ++d) {
    env.step(0);
    CHECK(env.current_heat() == doctest::Approx(env.seasonal_component(d)).epsilon(1e-12));
  }
  // quarter period reaches the crest
  CHECK(env.seasonal_component(22) == doctest::Approx(0.7).epsilon(0.01));
}

TEST_CASE("heat: deseasonalized residual has the configured lag-1 autocorrelation") {
  HeatConfig cfg;
  cfg.weather_base = 0.5;
  cfg.weather_amp = 0.2;
  cfg.weather_noise = 0.04;
  cfg.weather_ar = 0.8;
  cfg.season_length = 6000;
  cfg.max_episode_steps = 6000;
  cfg.budget = 0;
  cfg.overspend_penalty = 0.0;
  HeatAlertsEnv env(cfg);
  env.reset(20);
  std::vector<double> res;
  for (int t = 0; t < 5000; ++t) {
    res.push_back(env.current_heat() - env.seasonal_component(env.day()));
    env.step(0);
  }
  double mean = 0;
  for (double r : res) mean += r;
  mean /= res.size();
  double num = 0, den = 0;
  for (size_t i = 0; i + 1 < res.size(); ++i) num += (res[i] - mean) * (res[i + 1] - mean);
  for (double r : res) den += (r - mean) * (r - mean);
  double rho1 = num / den;
  CHECK(std::fabs(rho1 - cfg.weather_ar) < 0.05);
}

TEST_CASE("heat: state layout, weekday one-hot, and history shifting") {
  HeatConfig cfg = calm_heat();
  cfg.budget = 10;
  HeatAlertsEnv env(cfg);
  NumericState st = env.reset(6);
  CHECK(st.values(3) == 1.0);  // day 0 is Monday
  env.step(1);
  env.step(0);
  NumericState now = env.state();
  CHECK(now.values(3 + 2 % 7) == 1.0);  // day 2 => Wednesday slot
  CHECK(now.values(10) == 0.0);         // yesterday: quiet
  CHECK(now.values(11) == 1.0);         // two days ago: alert
  CHECK(now.values(1) == doctest::Approx(9.0 / 10.0));
  CHECK(now.values(2) == doctest::Approx(2.0 / 90.0));
}

TEST_CASE("heat: state text is pure and descriptive") {
  HeatConfig cfg = calm_heat();
  HeatAlertsEnv env(cfg);
  env.reset(8);
  env.step(1);
  std::string text = env.describe_state(env.state());
  CHECK(text.find("Day 1 of 90 (Tuesday).") != std::string::npos);
  CHECK(text.find("Current heat index: 0.80.") != std::string::npos);
  CHECK(text.find("Remaining alert budget: 9 of 10.") != std::string::npos);
  CHECK(text.find("most recent first: 1, 0") != std::string::npos);
  CHECK(text.find("Current consecutive-alert streak: 1 day(s).") != std::string::npos);
  CHECK(env.describe_state(env.state()) == text);
}

TEST_CASE("heat: season end terminates, step cap truncates") {
  HeatConfig cfg = calm_heat();
  cfg.season_length = 3;
  cfg.max_episode_steps = 10;
  HeatAlertsEnv env(cfg);
  env.reset(9);
  CHECK_FALSE(env.step(0).done());
  CHECK_FALSE(env.step(0).done());
  auto out = env.step(0);
  CHECK(out.terminated);
  CHECK_FALSE(out.truncated);

  HeatConfig cfg2 = calm_heat();
  cfg2.max_episode_steps = 2;
  HeatAlertsEnv env2(cfg2);
  env2.reset(9);
  env2.step(0);
  auto out2 = env2.step(0);
  CHECK(out2.truncated);
  CHECK_FALSE(out2.terminated);
}

TEST_CASE("heat: replay weather reads the csv and truncates on exhaustion") {
  auto path = std::filesystem::temp_directory_path() / "rbrl_weather.csv";
  {
    std::ofstream f(path);
    f << "day,heat_index\n0,0.30\n1,0.60\n2,0.90\n";
  }
  HeatConfig cfg;
  cfg.weather_mode = "replay";
  cfg.weather_csv = path.string();
  cfg.season_length = 90;
  HeatAlertsEnv env(cfg);
  env.reset(1);
  CHECK(env.current_heat() == 0.30);
  env.step(0);
  CHECK(env.current_heat() == 0.60);
  env.step(0);
  CHECK(env.current_heat() == 0.90);
  auto out = env.step(0);
  CHECK(out.truncated);
  CHECK(out.note.find("exhausted") != std::string::npos);

  // out-of-range series is rejected up front
  {
    std::ofstream f(path);
    f << "heat_index\n1.7\n";
  }
  CHECK_THROWS_AS(HeatAlertsEnv{cfg}, ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("heat: action parsing accepts the documented forms") {
  HeatAlertsEnv env(calm_heat());
  CHECK(*env.parse_action("{\"alert\": 1}") == 1);
  CHECK(*env.parse_action("{\"alert\": 0}") == 0);
  CHECK(*env.parse_action("issue 1") == 1);
  CHECK(*env.parse_action("0") == 0);
  CHECK_FALSE(env.parse_action("hot day").has_value());
  CHECK(*env.parse_action(env.action_text(1)) == 1);
  CHECK_THROWS_AS(env.step(2), std::out_of_range);
}

TEST_CASE("heat: config validation") {
  HeatConfig cfg;
  cfg.weather_mode = "nonsense";
  CHECK_THROWS_AS(HeatAlertsEnv{cfg}, ConfigError);
  cfg = HeatConfig{};
  cfg.weather_ar = 1.0;
  CHECK_THROWS_AS(HeatAlertsEnv{cfg}, ConfigError);
  cfg = HeatConfig{};
  cfg.streak_decay = -0.1;
  CHECK_THROWS_AS(HeatAlertsEnv{cfg}, ConfigError);
}
