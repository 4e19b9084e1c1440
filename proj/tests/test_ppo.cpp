#include "doctest.h"

#include "rbrl/ppo.hpp"
#include "rbrl/toy_env.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

using namespace rbrl;

namespace {

PpoConfig tiny_cfg() {
  PpoConfig c;
  c.num_envs = 4;
  c.num_steps = 32;
  c.num_minibatches = 4;
  c.update_epochs = 4;
  c.total_timesteps = 4 * 32 * 2;  // two updates
  return c;
}

std::function<EnvPtr()> toy_factory(double slip = 0.1) {
  return [slip]() -> EnvPtr {
    ToyConfig tc;
    tc.slip = slip;
    return std::make_unique<ToyEnv>(tc);
  };
}

PpoBatch random_batch(Rng& rng, int B, int A, double ratio_spread = 0.7) {
  PpoBatch b;
  b.logits = Mat::NullaryExpr(B, A, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
  b.values = Vec::NullaryExpr(B, [&](Eigen::Index) { return rng.normal(); });
  for (int i = 0; i < B; ++i) b.actions.push_back(rng.uniform_int(0, A - 1));
  // Old log-probs scattered around the fresh ones so some ratios clip.
  b.old_logp = Vec(B);
  for (int i = 0; i < B; ++i) {
    Vec row = b.logits.row(i).transpose();
    double mx = row.maxCoeff();
    double lse = std::log((row.array() - mx).exp().sum()) + mx;
    b.old_logp[i] = row[b.actions[i]] - lse + rng.uniform(-ratio_spread, ratio_spread);
  }
  b.old_values = Vec::NullaryExpr(B, [&](Eigen::Index) { return rng.normal(); });
  b.advantages = Vec::NullaryExpr(B, [&](Eigen::Index) { return rng.normal(); });
  b.returns = Vec::NullaryExpr(B, [&](Eigen::Index) { return rng.normal(); });
  return b;
}

std::map<std::string, Mat> snapshot(PpoTrainer& tr) {
  std::map<std::string, Mat> out;
  tr.visit([&](Param& p) { out[p.name] = p.w; });
  return out;
}

bool same_tensors(const std::map<std::string, Mat>& a, const std::map<std::string, Mat>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, va] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second.rows() != va.rows() || it->second.cols() != va.cols())
      return false;
    if (std::memcmp(va.data(), it->second.data(), sizeof(double) * va.size()) != 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("gae: recursion limits and hand-checked values") {
  SUBCASE("lambda 0 reduces to one-step TD errors") {
    Vec r(4), v(4);
    r << 1.0, -0.5, 0.25, 2.0;
    v << 0.3, 0.1, -0.2, 0.4;
    std::vector<uint8_t> dones = {0, 1, 0, 0};
    GaeOut g = gae(r, v, dones, /*bootstrap=*/0.7, 0.9, 0.0);
    CHECK(g.advantages[0] == doctest::Approx(1.0 + 0.9 * 0.1 - 0.3).epsilon(1e-12));
    CHECK(g.advantages[1] == doctest::Approx(-0.5 - 0.1).epsilon(1e-12));  // done masks bootstrap
    CHECK(g.advantages[2] == doctest::Approx(0.25 + 0.9 * 0.4 + 0.2).epsilon(1e-12));
    CHECK(g.advantages[3] == doctest::Approx(2.0 + 0.9 * 0.7 - 0.4).epsilon(1e-12));
    for (int t = 0; t < 4; ++t)
      CHECK(g.returns[t] == doctest::Approx(g.advantages[t] + v[t]).epsilon(1e-12));
  }
  SUBCASE("lambda 1, gamma 1, zero values gives reward-to-go") {
    Vec r(5), v = Vec::Zero(5);
    r << 1, 2, 3, 4, 5;
    std::vector<uint8_t> dones(5, 0);
    GaeOut g = gae(r, v, dones, 0.0, 1.0, 1.0);
    double togo = 0.0;
    for (int t = 4; t >= 0; --t) {
      togo += r[t];
      CHECK(g.advantages[t] == doctest::Approx(togo).epsilon(1e-12));
    }
  }
  SUBCASE("length-3 example matches an independent recursion") {
    Vec r(3), v(3);
    r << 1.0, 0.0, 1.0;
    v << 0.5, 0.5, 0.5;
    const double gamma = 0.9, lam = 0.9, boot = 0.25;
    std::vector<uint8_t> dones(3, 0);
    GaeOut g = gae(r, v, dones, boot, gamma, lam);

    // Brute-force recursion, written out independently of the implementation.
    double adv2 = (1.0 + gamma * boot - 0.5);
    double adv1 = (0.0 + gamma * 0.5 - 0.5) + gamma * lam * adv2;
    double adv0 = (1.0 + gamma * 0.5 - 0.5) + gamma * lam * adv1;
    CHECK(g.advantages[2] == doctest::Approx(adv2).epsilon(1e-12));
    CHECK(g.advantages[1] == doctest::Approx(adv1).epsilon(1e-12));
    CHECK(g.advantages[0] == doctest::Approx(adv0).epsilon(1e-12));
    CHECK(g.advantages[2] == doctest::Approx(0.725).epsilon(1e-12));
    CHECK(g.advantages[1] == doctest::Approx(0.53725).epsilon(1e-12));
    CHECK(g.advantages[0] == doctest::Approx(1.3851725).epsilon(1e-12));
  }
  SUBCASE("episode boundaries stop credit flowing backwards") {
    Vec r1(4), r2(4), v(4);
    r1 << 1, 1, 0, 0;
    r2 << 1, 1, 5, -3;  // differs only after the done at t=1
    v << 0.2, 0.3, 0.4, 0.5;
    std::vector<uint8_t> dones = {0, 1, 0, 0};
    GaeOut a = gae(r1, v, dones, 0.1, 0.95, 0.95);
    GaeOut b = gae(r2, v, dones, 0.1, 0.95, 0.95);
    CHECK(a.advantages[0] == b.advantages[0]);
    CHECK(a.advantages[1] == b.advantages[1]);
    CHECK(a.advantages[2] != b.advantages[2]);
  }
}

TEST_CASE("whiten: zero mean, unit std") {
  Rng rng(5);
  Vec x = Vec::NullaryExpr(64, [&](Eigen::Index) { return rng.normal(2.0, 3.5); });
  Vec w = whiten(x);
  CHECK(std::abs(w.mean()) < 1e-6);
  const double var = (w.array() - w.mean()).square().sum() / w.size();
  CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
  // Constant input degrades gracefully instead of dividing by zero.
  Vec c = Vec::Constant(8, 3.0);
  Vec wc = whiten(c);
  CHECK(wc.array().abs().maxCoeff() == 0.0);
}

TEST_CASE("ppo_losses: gradients match central finite differences") {
  Rng rng(42);
  const int B = 7, A = 4;
  PpoBatch b = random_batch(rng, B, A);
  PpoConfig cfg;
  cfg.norm_adv = true;

  // Keep clear of the max() kinks so finite differences are valid.
  {
    Mat logp(B, A);
    for (int i = 0; i < B; ++i) {
      Vec row = b.logits.row(i).transpose();
      double mx = row.maxCoeff();
      double lse = std::log((row.array() - mx).exp().sum()) + mx;
      logp.row(i) = (row.array() - lse).transpose();
    }
    for (int i = 0; i < B; ++i) {
      const double ratio = std::exp(logp(i, b.actions[i]) - b.old_logp[i]);
      REQUIRE(std::min(std::abs(ratio - 0.8), std::abs(ratio - 1.2)) > 1e-4);
      REQUIRE(std::abs(std::abs(b.values[i] - b.old_values[i]) - 0.2) > 1e-4);
      // Equal branch values with different slopes (the other kink source).
      const double vu = std::abs(b.values[i] - b.returns[i]);
      const double vcl = b.old_values[i] + std::clamp(b.values[i] - b.old_values[i], -0.2, 0.2);
      if (std::abs(b.values[i] - b.old_values[i]) > 0.2)
        REQUIRE(std::abs(vu - std::abs(vcl - b.returns[i])) > 1e-4);
    }
  }

  Mat dlogits;
  Vec dvalues;
  ppo_losses(b, cfg, &dlogits, &dvalues);

  const double h = 1e-6;
  for (int i = 0; i < B; ++i) {
    for (int k = 0; k < A; ++k) {
      PpoBatch bp = b, bm = b;
      bp.logits(i, k) += h;
      bm.logits(i, k) -= h;
      const double fd = (ppo_losses(bp, cfg).total - ppo_losses(bm, cfg).total) / (2 * h);
      CHECK(std::abs(fd - dlogits(i, k)) < 1e-6);
    }
    PpoBatch bp = b, bm = b;
    bp.values[i] += h;
    bm.values[i] -= h;
    const double fd = (ppo_losses(bp, cfg).total - ppo_losses(bm, cfg).total) / (2 * h);
    CHECK(std::abs(fd - dvalues[i]) < 1e-6);
  }
}

TEST_CASE("ppo_losses: ratio-one batch behaves like vanilla policy gradient") {
  Rng rng(7);
  const int B = 12, A = 5;
  PpoBatch b = random_batch(rng, B, A, /*ratio_spread=*/0.0);  // old_logp == fresh logp
  PpoConfig cfg;
  PpoLosses l = ppo_losses(b, cfg);
  CHECK(l.approx_kl == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(l.clipfrac == 0.0);
  // Whitened advantages have zero mean, and with every ratio at 1 the
  // surrogate reduces to their negated mean.
  CHECK(std::abs(l.policy_loss) < 1e-12);
}

TEST_CASE("ppo_losses: binding clip flattens the policy term") {
  PpoConfig cfg;
  cfg.norm_adv = false;
  cfg.ent_coef = 0.0;
  cfg.vf_coef = 0.0;

  auto one_sample = [&](double adv, double ratio) {
    PpoBatch b;
    b.logits = Mat::Zero(1, 3);  // uniform policy: logp = -log 3 for all actions
    b.values = Vec::Zero(1);
    b.actions = {1};
    b.old_logp = Vec::Constant(1, -std::log(3.0) - std::log(ratio));
    b.old_values = Vec::Zero(1);
    b.advantages = Vec::Constant(1, adv);
    b.returns = Vec::Zero(1);
    return b;
  };

  SUBCASE("positive advantage, ratio above the band") {
    PpoBatch b = one_sample(1.0, 2.0);
    Mat dlogits;
    PpoLosses l = ppo_losses(b, cfg, &dlogits);
    CHECK(l.policy_loss == doctest::Approx(-1.2).epsilon(1e-12));
    CHECK(dlogits.cwiseAbs().maxCoeff() == 0.0);  // flat: no gradient through the clip
    CHECK(l.clipfrac == 1.0);
  }
  SUBCASE("negative advantage, ratio below the band") {
    PpoBatch b = one_sample(-1.0, 0.5);
    Mat dlogits;
    PpoLosses l = ppo_losses(b, cfg, &dlogits);
    CHECK(l.policy_loss == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(dlogits.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("inside the band the surrogate stays live") {
    PpoBatch b = one_sample(1.0, 1.1);
    Mat dlogits;
    PpoLosses l = ppo_losses(b, cfg, &dlogits);
    CHECK(l.policy_loss == doctest::Approx(-1.1).epsilon(1e-12));
    CHECK(dlogits.cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("ppo: overfitting a frozen batch drives the loss down") {
  PpoConfig cfg = tiny_cfg();
  cfg.learning_rate = 1e-3;
  PpoTrainer tr(/*state_dim=*/4, /*num_actions=*/3, cfg, /*seed=*/3);

  Rng rng(11);
  const int B = 16;
  Mat states = Mat::NullaryExpr(B, 4, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
  std::vector<int> actions;
  Vec old_logp(B), old_values(B), adv(B), ret(B);
  for (int i = 0; i < B; ++i) {
    double lp, v;
    actions.push_back(tr.act_sample(states.row(i).transpose(), rng, &lp, &v));
    old_logp[i] = lp;
    old_values[i] = v;
    adv[i] = rng.normal();
    ret[i] = v + adv[i];
  }

  std::vector<double> losses;
  for (int epoch = 0; epoch < 50; ++epoch)
    losses.push_back(tr.update_minibatch(states, actions, old_logp, old_values, adv, ret).total);
  for (size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] <= losses[i - 1] + 1e-9);
  CHECK(losses.back() < losses.front() - 0.05);
}

TEST_CASE("ppo: learns the ring task from raw one-hot states") {
  PpoConfig cfg;
  cfg.num_envs = 4;
  cfg.num_steps = 32;
  cfg.num_minibatches = 4;
  cfg.update_epochs = 8;
  cfg.learning_rate = 2.5e-3;  // scaled up to keep the test fast
  cfg.total_timesteps = 4 * 32 * 30;
  PpoTrainer tr(/*state_dim=*/5, /*num_actions=*/5, cfg, /*seed=*/9);

  PpoEvalOut before = tr.evaluate(toy_factory(), 10, 123);
  PpoRunStats stats = tr.train(toy_factory());
  CHECK(stats.updates == 30);
  CHECK(stats.steps == cfg.total_timesteps);
  CHECK(stats.episodes == stats.steps / 32);

  PpoEvalOut after = tr.evaluate(toy_factory(), 10, 123);
  // Optimal play earns 1 per step, 32 per episode; random play about 6.4.
  CHECK(after.mean_return > 28.0);
  CHECK(after.mean_return > before.mean_return + 10.0);

  // The greedy policy should pick (position + 2) mod 5 everywhere.
  for (int pos = 0; pos < 5; ++pos) {
    Vec s = Vec::Zero(5);
    s[pos] = 1.0;
    CHECK(tr.act_greedy(s) == (pos + 2) % 5);
  }
}

TEST_CASE("ppo: training is deterministic and metrics are written") {
  const std::string csv =
      (std::filesystem::temp_directory_path() / "rbrl_ppo_metrics.csv").string();
  PpoConfig cfg = tiny_cfg();
  PpoTrainer a(5, 5, cfg, 31);
  PpoTrainer b(5, 5, cfg, 31);
  PpoRunStats sa = a.train(toy_factory(), csv);
  PpoRunStats sb = b.train(toy_factory());
  CHECK(sa.steps == sb.steps);
  CHECK(sa.episodes == sb.episodes);
  CHECK(same_tensors(snapshot(a), snapshot(b)));

  std::ifstream in(csv);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line.find("policy_loss") != std::string::npos);
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);  // one per update
  std::remove(csv.c_str());

  PpoTrainer c(5, 5, cfg, 32);
  c.train(toy_factory());
  CHECK(!same_tensors(snapshot(a), snapshot(c)));
}

TEST_CASE("ppo: learning-rate annealing is off by default") {
  PpoConfig cfg = tiny_cfg();
  CHECK(cfg.anneal_lr == false);
  PpoTrainer a(5, 5, cfg, 1);
  a.train(toy_factory());
  CHECK(a.opt().lr() == doctest::Approx(cfg.learning_rate).epsilon(1e-15));

  cfg.anneal_lr = true;
  PpoTrainer b(5, 5, cfg, 1);
  b.train(toy_factory());
  CHECK(b.opt().lr() < cfg.learning_rate);
}

TEST_CASE("ppo: checkpoint restores the trainer exactly") {
  PpoConfig cfg = tiny_cfg();
  PpoTrainer a(5, 5, cfg, 77);
  a.train(toy_factory());

  Checkpoint ck;
  capture_ppo("ppo.", a, ck);
  const std::string p = (std::filesystem::temp_directory_path() / "rbrl_ppo_ck.bin").string();
  ck.save(p);

  PpoTrainer b(5, 5, cfg, 5151);
  restore_ppo("ppo.", b, Checkpoint::load(p));
  std::remove(p.c_str());
  CHECK(same_tensors(snapshot(a), snapshot(b)));

  Vec s = Vec::Zero(5);
  s[2] = 1.0;
  Vec pa = a.policy_probs(s), pb = b.policy_probs(s);
  CHECK(std::memcmp(pa.data(), pb.data(), sizeof(double) * pa.size()) == 0);
  CHECK(a.value(s) == b.value(s));

  // Post-restore updates stay in lockstep (Adam moments included).
  Rng rng(2);
  Mat states = Mat::NullaryExpr(8, 5, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
  std::vector<int> actions = {0, 1, 2, 3, 4, 0, 1, 2};
  Vec lp = Vec::Constant(8, -std::log(5.0)), ov = Vec::Zero(8), adv = Vec::Ones(8),
      ret = Vec::Ones(8);
  PpoLosses la = a.update_minibatch(states, actions, lp, ov, adv, ret);
  PpoLosses lb = b.update_minibatch(states, actions, lp, ov, adv, ret);
  CHECK(la.total == lb.total);
  CHECK(same_tensors(snapshot(a), snapshot(b)));
}
