#include "doctest.h"

#include "rbrl/gradcheck.hpp"
#include "rbrl/sac.hpp"

#include <cmath>
#include <set>

using namespace rbrl;

namespace {

NetConfig tiny_net(int state_dim = 3, int embed = 8) {
  NetConfig nc;
  nc.state_dim = state_dim;
  nc.embed_dim = embed;
  nc.hidden_dim = 8;
  nc.n_heads = 2;
  nc.dropout = 0.0;  // keep training passes deterministic for the checks
  return nc;
}

Transition random_transition(Rng& rng, int state_dim, int q, int embed) {
  Transition t;
  t.state = Vec(state_dim);
  t.next_state = Vec(state_dim);
  for (int i = 0; i < state_dim; ++i) {
    t.state(i) = rng.normal();
    t.next_state(i) = rng.normal();
  }
  t.rules = Mat(q, embed);
  t.next_rules = Mat(q, embed);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < embed; ++j) {
      t.rules(i, j) = rng.normal();
      t.next_rules(i, j) = rng.normal();
    }
  t.chosen = rng.uniform_int(0, q - 1);
  t.reward = rng.normal();
  t.done = rng.uniform() < 0.3;
  return t;
}

}  // namespace

TEST_CASE("replay buffer is a ring with uniform sampling") {
  ReplayBuffer buf(4);
  Rng rng(1);
  for (int i = 0; i < 6; ++i) {
    Transition t;
    t.reward = i;
    buf.add(std::move(t));
  }
  CHECK(buf.size() == 4);
  // Entries 0 and 1 were overwritten by 4 and 5.
  std::multiset<double> rewards;
  for (int i = 0; i < buf.size(); ++i) rewards.insert(buf.at(i).reward);
  CHECK(rewards == std::multiset<double>({2.0, 3.0, 4.0, 5.0}));

  ReplayBuffer big(16);
  for (int i = 0; i < 16; ++i) {
    Transition t;
    t.reward = i;
    big.add(std::move(t));
  }
  std::vector<int> counts(16, 0);
  const int draws = 16000;
  for (int rep = 0; rep < draws / 16; ++rep)
    for (int i : big.sample_indices(16, rng)) ++counts[i];
  double chi2 = 0.0;
  const double expected = draws / 16.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 37.7);  // chi-square(15) at p ~ 0.001
}

TEST_CASE("bellman targets match a hand-computed oracle to 1e-10") {
  const int q = 3, embed = 8, sdim = 3;
  SacConfig sc;
  sc.gamma = 0.9;
  sc.alpha = 0.05;
  sc.autotune = false;
  SacTrainer trainer(tiny_net(sdim, embed), sc, 42);

  Rng rng(7);
  std::vector<Transition> ts;
  std::vector<const Transition*> batch;
  for (int i = 0; i < 5; ++i) ts.push_back(random_transition(rng, sdim, q, embed));
  for (const auto& t : ts) batch.push_back(&t);

  const Vec y = trainer.compute_targets(batch);
  for (size_t i = 0; i < ts.size(); ++i) {
    const Transition& t = ts[i];
    // Recompute the target from first principles with the same networks.
    Vec logits = trainer.actor().forward(t.next_state, t.next_rules, false);
    Vec pi(q);
    double mx = logits.maxCoeff(), z = 0.0;
    for (int j = 0; j < q; ++j) z += std::exp(logits(j) - mx);
    for (int j = 0; j < q; ++j) pi(j) = std::exp(logits(j) - mx) / z;
    Vec qa = trainer.q1_target().forward(t.next_state, t.next_rules, false);
    Vec qb = trainer.q2_target().forward(t.next_state, t.next_rules, false);
    double v = 0.0;
    for (int j = 0; j < q; ++j)
      v += pi(j) * (std::min(qa(j), qb(j)) - sc.alpha * std::log(pi(j)));
    const double want = t.reward + sc.gamma * (t.done ? 0.0 : 1.0) * v;
    CHECK(std::fabs(y(static_cast<int>(i)) - want) < 1e-10);
  }
}

TEST_CASE("actor gradient formula agrees with central differences") {
  const int q = 4, embed = 8, sdim = 3;
  SacConfig sc;
  sc.alpha = 0.07;
  sc.autotune = false;
  SacTrainer trainer(tiny_net(sdim, embed), sc, 9);

  Rng rng(3);
  Transition t = random_transition(rng, sdim, q, embed);
  const double a = trainer.alpha();
  const Vec min_q = trainer.q1()
                        .forward(t.state, t.rules, false)
                        .cwiseMin(trainer.q2().forward(t.state, t.rules, false));

  auto loss_fn = [&]() {
    Vec logits = trainer.actor().forward(t.state, t.rules, false);
    Vec pi(q);
    double mx = logits.maxCoeff(), z = 0.0;
    for (int j = 0; j < q; ++j) z += std::exp(logits(j) - mx);
    for (int j = 0; j < q; ++j) pi(j) = std::exp(logits(j) - mx) / z;
    double loss = 0.0;
    for (int j = 0; j < q; ++j) loss += pi(j) * (a * std::log(pi(j)) - min_q(j));
    return loss;
  };

  trainer.actor().zero_grad();
  {
    Vec logits = trainer.actor().forward(t.state, t.rules, false);
    Vec pi(q);
    double mx = logits.maxCoeff(), z = 0.0;
    for (int j = 0; j < q; ++j) z += std::exp(logits(j) - mx);
    for (int j = 0; j < q; ++j) pi(j) = std::exp(logits(j) - mx) / z;
    Vec log_pi = safe_log(pi);
    Vec f = a * log_pi - min_q;
    double loss = pi.dot(f);
    Vec dlogits = (pi.array() * (f.array() - loss)).matrix();
    trainer.actor().backward(dlogits);
  }
  auto res = grad_check(trainer.actor().params(), loss_fn, 1e-5, 40);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("hard and soft target syncs blend exactly") {
  SacConfig sc;
  SacTrainer trainer(tiny_net(), sc, 5);

  // Perturb the online critics away from the targets.
  trainer.q1().visit([](Param& p) { p.w.array() += 0.25; });
  trainer.q2().visit([](Param& p) { p.w.array() -= 0.125; });

  std::vector<Mat> old_target;
  trainer.q1_target().visit([&](Param& p) { old_target.push_back(p.w); });

  SUBCASE("tau = 1 copies bit for bit") {
    trainer.sync_targets(1.0);
    std::vector<Mat> online, target;
    trainer.q1().visit([&](Param& p) { online.push_back(p.w); });
    trainer.q1_target().visit([&](Param& p) { target.push_back(p.w); });
    REQUIRE(online.size() == target.size());
    for (size_t i = 0; i < online.size(); ++i)
      CHECK((online[i] - target[i]).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("tau = 0.5 is the exact midpoint") {
    trainer.sync_targets(0.5);
    std::vector<Mat> online, target;
    trainer.q1().visit([&](Param& p) { online.push_back(p.w); });
    trainer.q1_target().visit([&](Param& p) { target.push_back(p.w); });
    for (size_t i = 0; i < online.size(); ++i) {
      Mat want = 0.5 * online[i] + 0.5 * old_target[i];
      CHECK((want - target[i]).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("training is gated until learning_starts") {
  SacConfig sc;
  sc.learning_starts = 32;
  sc.batch_size = 8;
  SacTrainer trainer(tiny_net(), sc, 1);
  ReplayBuffer buf(64);
  Rng rng(2);
  for (int i = 0; i < 16; ++i) buf.add(random_transition(rng, 3, 3, 8));
  TrainMetrics m = trainer.train_step(buf, rng);
  CHECK(m.updates == 0);
  CHECK(trainer.steps() == 0);
}

TEST_CASE("gamma = 0 contextual bandit recovers per-rule rewards") {
  const int q = 3, embed = 8, sdim = 3;
  SacConfig sc;
  sc.gamma = 0.0;
  sc.alpha = 1e-3;
  sc.autotune = false;
  sc.policy_lr = 5e-3;
  sc.q_lr = 5e-3;
  sc.batch_size = 16;
  sc.learning_starts = 48;
  sc.buffer_size = 256;
  SacTrainer trainer(tiny_net(sdim, embed), sc, 12);

  Rng rng(21);
  Vec state = Vec::Zero(sdim);
  state(0) = 1.0;
  Mat rules(q, embed);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < embed; ++j) rules(i, j) = rng.normal();
  const double arm_reward[q] = {0.1, 0.9, 0.5};

  ReplayBuffer buf(sc.buffer_size);
  for (int i = 0; i < 120; ++i) {
    Transition t;
    t.state = state;
    t.rules = rules;
    t.chosen = i % q;
    t.reward = arm_reward[t.chosen];
    t.done = true;
    t.next_state = state;
    t.next_rules = rules;
    buf.add(std::move(t));
  }

  for (int step = 0; step < 300; ++step) trainer.train_step(buf, rng);

  const Vec q1v = trainer.q1().forward(state, rules, false);
  double mae = 0.0;
  for (int i = 0; i < q; ++i) mae += std::fabs(q1v(i) - arm_reward[i]) / q;
  CHECK(mae < 0.05);
  CHECK(trainer.act_greedy(state, rules) == 1);
  CHECK(trainer.policy_probs(state, rules)(1) > 0.8);
}

TEST_CASE("temperature autotuning pushes entropy toward the target") {
  const int q = 5, embed = 8, sdim = 3;
  SacConfig sc;
  sc.alpha = 0.05;
  sc.autotune = true;
  sc.alpha_lr = 5e-3;
  sc.learning_starts = 32;
  SacTrainer trainer(tiny_net(sdim, embed), sc, 3);

  ReplayBuffer buf(128);
  Rng rng(8);
  for (int i = 0; i < 64; ++i) buf.add(random_transition(rng, sdim, q, embed));

  // A freshly initialized policy is near uniform, so its entropy exceeds
  // 0.89 log(5): the temperature must fall.
  const double alpha0 = trainer.alpha();
  for (int i = 0; i < 20; ++i) trainer.train_step(buf, rng);
  CHECK(trainer.target_entropy() == doctest::Approx(0.89 * std::log(5.0)));
  CHECK(trainer.alpha() < alpha0);
}

TEST_CASE("target networks only move on the sync schedule") {
  SacConfig sc;
  sc.learning_starts = 16;
  sc.batch_size = 8;
  sc.target_network_frequency = 64;
  SacTrainer trainer(tiny_net(), sc, 77);
  ReplayBuffer buf(64);
  Rng rng(5);
  for (int i = 0; i < 32; ++i) buf.add(random_transition(rng, 3, 3, 8));

  std::vector<Mat> before;
  trainer.q1_target().visit([&](Param& p) { before.push_back(p.w); });
  for (int i = 0; i < 63; ++i) trainer.train_step(buf, rng);
  std::vector<Mat> after63;
  trainer.q1_target().visit([&](Param& p) { after63.push_back(p.w); });
  for (size_t i = 0; i < before.size(); ++i)
    CHECK((before[i] - after63[i]).cwiseAbs().maxCoeff() == 0.0);

  trainer.train_step(buf, rng);  // step 64 triggers the hard sync
  std::vector<Mat> online, target;
  trainer.q1().visit([&](Param& p) { online.push_back(p.w); });
  trainer.q1_target().visit([&](Param& p) { target.push_back(p.w); });
  bool moved = false;
  for (size_t i = 0; i < online.size(); ++i) {
    CHECK((online[i] - target[i]).cwiseAbs().maxCoeff() == 0.0);
    if ((before[i] - target[i]).cwiseAbs().maxCoeff() > 0.0) moved = true;
  }
  CHECK(moved);
}
