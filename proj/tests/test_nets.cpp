#include "doctest.h"

#include "rbrl/gradcheck.hpp"
#include "rbrl/nets.hpp"

#include <algorithm>
#include <cmath>

using namespace rbrl;

namespace {

NetConfig small_config() {
  NetConfig cfg;
  cfg.state_dim = 6;
  cfg.embed_dim = 10;
  cfg.hidden_dim = 8;
  cfg.n_heads = 2;
  cfg.cross_layers = 1;
  cfg.self_layers = 1;
  cfg.dropout = 0.0;
  return cfg;
}

Mat random_mat(int r, int c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal(0.0, scale);
  return m;
}

Vec random_vec(int n, Rng& rng) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("attention net: shapes, determinism, finiteness") {
  auto cfg = small_config();
  AttentionNet net(cfg, 123, "actor");
  Rng rng(9);
  Vec s = random_vec(cfg.state_dim, rng);
  Mat rules = random_mat(5, cfg.embed_dim, rng);
  Vec a = net.forward(s, rules);
  Vec b = net.forward(s, rules);
  REQUIRE(a.size() == 5);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < a.size(); ++i) CHECK(std::isfinite(a(i)));

  AttentionNet net2(cfg, 123, "actor");
  Vec c = net2.forward(s, rules);
  CHECK((a - c).cwiseAbs().maxCoeff() == 0.0);  // same seed, same params

  AttentionNet net3(cfg, 124, "actor");
  Vec d = net3.forward(s, rules);
  CHECK((a - d).cwiseAbs().maxCoeff() > 0.0);  // different seed differs
}

TEST_CASE("attention net handles a varying number of rules") {
  auto cfg = small_config();
  AttentionNet net(cfg, 5, "n");
  Rng rng(2);
  Vec s = random_vec(cfg.state_dim, rng);
  for (int q : {1, 2, 7}) {
    Vec out = net.forward(s, random_mat(q, cfg.embed_dim, rng));
    CHECK(out.size() == q);
  }
}

TEST_CASE("permutation equivariance over candidate rules") {
  auto cfg = small_config();
  AttentionNet net(cfg, 77, "n");
  Rng rng(4);
  Vec s = random_vec(cfg.state_dim, rng);
  Mat rules = random_mat(5, cfg.embed_dim, rng);
  Vec base = net.forward(s, rules);

  std::vector<int> perm = {3, 0, 4, 1, 2};
  Mat shuffled(5, cfg.embed_dim);
  for (int i = 0; i < 5; ++i) shuffled.row(i) = rules.row(perm[i]);
  Vec out = net.forward(s, shuffled);
  for (int i = 0; i < 5; ++i) CHECK(out(i) == doctest::Approx(base(perm[i])).epsilon(1e-12));
}

TEST_CASE("identical rule rows score identically") {
  auto cfg = small_config();
  AttentionNet net(cfg, 88, "n");
  Rng rng(6);
  Vec s = random_vec(cfg.state_dim, rng);
  Mat rules(3, cfg.embed_dim);
  Eigen::RowVectorXd row = random_mat(1, cfg.embed_dim, rng).row(0);
  for (int i = 0; i < 3; ++i) rules.row(i) = row;
  Vec out = net.forward(s, rules);
  CHECK(out(0) == doctest::Approx(out(1)).epsilon(1e-14));
  CHECK(out(1) == doctest::Approx(out(2)).epsilon(1e-14));
}

TEST_CASE("logit clamp fires and is flat beyond the clamp") {
  auto cfg = small_config();
  cfg.clamp_output = true;
  cfg.clamp_value = 0.01;  // absurdly tight so it must fire
  AttentionNet net(cfg, 3, "n");
  Rng rng(8);
  Vec s = random_vec(cfg.state_dim, rng);
  Mat rules = random_mat(4, cfg.embed_dim, rng);
  Vec out = net.forward(s, rules);
  CHECK(out.cwiseAbs().maxCoeff() <= 0.01 + 1e-15);

  // gradient through a clamped entry is zero
  net.zero_grad();
  Vec g = Vec::Ones(4);
  net.backward(g);
  double total = 0.0;
  for (Param* p : net.params()) total += p->g.cwiseAbs().sum();
  CHECK(total == 0.0);  // every logit clamped -> nothing flows
}

TEST_CASE("state changes move the logits (cross-attention is live)") {
  auto cfg = small_config();
  AttentionNet net(cfg, 15, "n");
  Rng rng(10);
  Mat rules = random_mat(4, cfg.embed_dim, rng);
  Vec s1 = random_vec(cfg.state_dim, rng);
  Vec s2 = random_vec(cfg.state_dim, rng);
  Vec o1 = net.forward(s1, rules);
  Vec o2 = net.forward(s2, rules);
  CHECK((o1 - o2).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("full-network gradcheck, one and two blocks") {
  for (int layers : {1, 2}) {
    auto cfg = small_config();
    cfg.cross_layers = layers;
    cfg.self_layers = layers;
    AttentionNet net(cfg, 1000 + layers, "n");
    Rng rng(20 + layers);
    Vec s = random_vec(cfg.state_dim, rng);
    Mat rules = random_mat(3, cfg.embed_dim, rng);
    Vec g = random_vec(3, rng);

    auto loss = [&]() { return g.dot(net.forward(s, rules)); };
    net.zero_grad();
    (void)net.forward(s, rules);
    net.backward(g);
    auto res = grad_check(net.params(), loss);
    INFO("worst tensor: ", res.worst_param);
    CHECK(res.max_rel_err < 1e-4);
    CHECK(res.entries_checked > 100);
  }
}

TEST_CASE("target blend: tau=1 copies, tau=0.5 averages") {
  auto cfg = small_config();
  AttentionNet a(cfg, 1, "a");
  AttentionNet b(cfg, 2, "b");
  AttentionNet b_orig(cfg, 2, "b");

  b.blend_from(a, 1.0);
  auto pa = a.params();
  auto pb = b.params();
  for (size_t i = 0; i < pa.size(); ++i)
    CHECK((pa[i]->w - pb[i]->w).cwiseAbs().maxCoeff() == 0.0);

  AttentionNet c(cfg, 2, "b");
  c.blend_from(a, 0.5);
  auto pc = c.params();
  auto po = b_orig.params();
  for (size_t i = 0; i < pc.size(); ++i) {
    Mat expect = 0.5 * pa[i]->w + 0.5 * po[i]->w;
    CHECK((pc[i]->w - expect).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("categorical helpers") {
  Vec uni = Vec::Constant(5, 0.2);
  CHECK(categorical_entropy(uni) == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  Vec onehot = Vec::Zero(4);
  onehot(2) = 1.0;
  CHECK(categorical_entropy(onehot) == 0.0);
  CHECK(argmax_index(onehot) == 2);

  Vec p(3);
  p << 0.2, 0.5, 0.3;
  Rng rng(33);
  std::vector<int> counts(3, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++counts[sample_categorical(p, rng)];
  for (int i = 0; i < 3; ++i) {
    double freq = double(counts[i]) / n;
    double se = std::sqrt(p(i) * (1 - p(i)) / n);
    CHECK(std::fabs(freq - p(i)) < 5 * se);
  }

  Vec logs = safe_log(Vec::Zero(2));
  CHECK(std::isfinite(logs(0)));
}

TEST_CASE("dropout only perturbs training-mode forwards") {
  auto cfg = small_config();
  cfg.dropout = 0.5;
  AttentionNet net(cfg, 55, "n");
  Rng rng(44);
  Vec s = random_vec(cfg.state_dim, rng);
  Mat rules = random_mat(4, cfg.embed_dim, rng);
  Vec eval1 = net.forward(s, rules, false);
  Vec eval2 = net.forward(s, rules, false);
  CHECK((eval1 - eval2).cwiseAbs().maxCoeff() == 0.0);
  Vec train1 = net.forward(s, rules, true);
  Vec train2 = net.forward(s, rules, true);
  // two training passes draw different masks; collision is ~impossible
  CHECK((train1 - train2).cwiseAbs().maxCoeff() > 0.0);
}
