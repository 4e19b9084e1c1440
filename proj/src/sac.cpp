#include "rbrl/sac.hpp"

#include <algorithm>
#include <cmath>

namespace rbrl {

void SacConfig::validate() const {
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("sac: gamma must lie in [0, 1]");
  if (tau <= 0.0 || tau > 1.0) throw ConfigError("sac: tau must lie in (0, 1]");
  if (batch_size < 1) throw ConfigError("sac: batch_size must be >= 1");
  if (buffer_size < batch_size) throw ConfigError("sac: buffer_size must cover a batch");
  if (learning_starts < 0) throw ConfigError("sac: learning_starts must be >= 0");
  if (policy_lr <= 0 || q_lr <= 0 || alpha_lr <= 0) throw ConfigError("sac: lrs must be > 0");
  if (updates_per_step < 1) throw ConfigError("sac: updates_per_step must be >= 1");
  if (target_network_frequency < 1)
    throw ConfigError("sac: target_network_frequency must be >= 1");
  if (alpha <= 0.0) throw ConfigError("sac: alpha must be > 0");
  if (target_entropy_scale < 0.0 || target_entropy_scale > 1.0)
    throw ConfigError("sac: target_entropy_scale must lie in [0, 1]");
}

// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("replay buffer capacity must be >= 1");
  data_.resize(capacity);
}

void ReplayBuffer::add(Transition t) {
  data_[next_] = std::move(t);
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

std::vector<int> ReplayBuffer::sample_indices(int batch, Rng& rng) const {
  std::vector<int> idx(batch);
  for (int i = 0; i < batch; ++i) idx[i] = rng.uniform_int(0, size_ - 1);
  return idx;
}

// ---------------------------------------------------------------------------

namespace {

Vec softmax_vec(const Vec& logits) {
  const double mx = logits.maxCoeff();
  Vec e = (logits.array() - mx).exp();
  return e / e.sum();
}

}  // namespace

SacTrainer::SacTrainer(const NetConfig& net_cfg, const SacConfig& cfg, uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  NetConfig actor_cfg = net_cfg;
  actor_cfg.clamp_output = true;
  NetConfig critic_cfg = net_cfg;
  critic_cfg.clamp_output = false;

  actor_ = AttentionNet(actor_cfg, derive_seed(seed, 0xac, 0, 0), "actor");
  q1_ = AttentionNet(critic_cfg, derive_seed(seed, 0xc1, 0, 0), "q1");
  q2_ = AttentionNet(critic_cfg, derive_seed(seed, 0xc2, 0, 0), "q2");
  q1_target_ = AttentionNet(critic_cfg, derive_seed(seed, 0xc1, 1, 0), "q1_target");
  q2_target_ = AttentionNet(critic_cfg, derive_seed(seed, 0xc2, 1, 0), "q2_target");
  q1_target_.blend_from(q1_, 1.0);
  q2_target_.blend_from(q2_, 1.0);

  log_alpha_.name = "log_alpha";
  log_alpha_.w = Mat::Constant(1, 1, std::log(cfg_.alpha));
  log_alpha_.g = Mat::Zero(1, 1);

  actor_opt_ = Adam(actor_.params(), cfg_.policy_lr);
  std::vector<Param*> qp = q1_.params();
  for (Param* p : q2_.params()) qp.push_back(p);
  q_opt_ = Adam(qp, cfg_.q_lr);
  alpha_opt_ = Adam({&log_alpha_}, cfg_.alpha_lr);
}

double SacTrainer::alpha() const {
  return cfg_.autotune ? std::exp(log_alpha_.w(0, 0)) : cfg_.alpha;
}

Vec SacTrainer::policy_probs(const Vec& state, const Mat& rules) {
  return softmax_vec(actor_.forward(state, rules, /*training=*/false));
}

int SacTrainer::act_sample(const Vec& state, const Mat& rules, Rng& rng) {
  return sample_categorical(policy_probs(state, rules), rng);
}

int SacTrainer::act_greedy(const Vec& state, const Mat& rules) {
  return argmax_index(policy_probs(state, rules));
}

Vec SacTrainer::compute_targets(const std::vector<const Transition*>& batch) {
  Vec y(static_cast<int>(batch.size()));
  for (size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = *batch[i];
    const Vec pi = softmax_vec(actor_.forward(t.next_state, t.next_rules, false));
    const Vec log_pi = safe_log(pi);
    const Vec qa = q1_target_.forward(t.next_state, t.next_rules, false);
    const Vec qb = q2_target_.forward(t.next_state, t.next_rules, false);
    const Vec min_q = qa.cwiseMin(qb);
    const double v = pi.dot(min_q - alpha() * log_pi);
    y(static_cast<int>(i)) = t.reward + cfg_.gamma * (t.done ? 0.0 : 1.0) * v;
  }
  return y;
}

void SacTrainer::sync_targets(double tau) {
  q1_target_.blend_from(q1_, tau);
  q2_target_.blend_from(q2_, tau);
}

double SacTrainer::critic_loss_grads(const std::vector<const Transition*>& batch, const Vec& y,
                                     bool with_grads) {
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double critic_loss = 0.0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = *batch[i];
    for (AttentionNet* qn : {&q1_, &q2_}) {
      const Vec q = qn->forward(t.state, t.rules, /*training=*/true);
      const double td = q(t.chosen) - y(static_cast<int>(i));
      critic_loss += td * td * inv_b;
      if (with_grads) {
        Vec dq = Vec::Zero(q.size());
        dq(t.chosen) = 2.0 * td * inv_b;
        qn->backward(dq);
      }
    }
  }
  return critic_loss;
}

double SacTrainer::actor_loss_grads(const std::vector<const Transition*>& batch,
                                    double* entropy_out, bool with_grads) {
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double a = alpha();
  double actor_loss = 0.0, entropy = 0.0;
  for (const Transition* tp : batch) {
    const Transition& t = *tp;
    const Vec logits = actor_.forward(t.state, t.rules, /*training=*/true);
    const Vec pi = softmax_vec(logits);
    const Vec log_pi = safe_log(pi);
    const Vec min_q =
        q1_.forward(t.state, t.rules, false).cwiseMin(q2_.forward(t.state, t.rules, false));
    const Vec f = a * log_pi - min_q;
    const double loss = pi.dot(f);
    if (with_grads) {
      // d loss / d logit_k = pi_k (f_k - sum_j pi_j f_j)
      const Vec dlogits = (pi.array() * (f.array() - loss)).matrix() * inv_b;
      actor_.backward(dlogits);
    }
    actor_loss += loss * inv_b;
    entropy += categorical_entropy(pi) * inv_b;
  }
  if (entropy_out) *entropy_out = entropy;
  return actor_loss;
}

TrainMetrics SacTrainer::train_step(const ReplayBuffer& buf, Rng& rng) {
  TrainMetrics m;
  m.alpha = alpha();
  if (buf.size() < std::max(cfg_.batch_size, cfg_.learning_starts)) return m;

  const double inv_updates = 1.0 / cfg_.updates_per_step;
  for (int u = 0; u < cfg_.updates_per_step; ++u) {
    const std::vector<int> idx = buf.sample_indices(cfg_.batch_size, rng);
    std::vector<const Transition*> batch;
    batch.reserve(idx.size());
    for (int i : idx) batch.push_back(&buf.at(i));

    // --- critics: MSE of the chosen rule's Q against the Bellman target ---
    const Vec y = compute_targets(batch);
    q1_.zero_grad();
    q2_.zero_grad();
    const double critic_loss = critic_loss_grads(batch, y, /*with_grads=*/true);
    q_opt_.step();

    // --- actor: exact expectation of alpha log pi - min Q under pi ---
    actor_.zero_grad();
    double entropy = 0.0;
    const double actor_loss = actor_loss_grads(batch, &entropy, /*with_grads=*/true);
    actor_opt_.step();

    // --- temperature: pull entropy toward the target fraction of log q ---
    double alpha_loss = 0.0;
    if (cfg_.autotune) {
      const int q_count = static_cast<int>(batch.front()->rules.rows());
      target_entropy_ = cfg_.target_entropy_scale * std::log(static_cast<double>(q_count));
      log_alpha_.zero_grad();
      // loss = alpha (H - target); d/d log_alpha = alpha (H - target)
      alpha_loss = alpha() * (entropy - target_entropy_);
      log_alpha_.g(0, 0) = alpha_loss;
      alpha_opt_.step();
    }

    m.critic_loss += critic_loss * inv_updates;
    m.actor_loss += actor_loss * inv_updates;
    m.alpha_loss += alpha_loss * inv_updates;
    m.entropy += entropy * inv_updates;
    ++m.updates;
  }

  ++steps_;
  if (steps_ % cfg_.target_network_frequency == 0) sync_targets(cfg_.tau);
  m.alpha = alpha();
  return m;
}

void SacTrainer::visit(const ParamVisitor& fn) {
  actor_.visit(fn);
  q1_.visit(fn);
  q2_.visit(fn);
  q1_target_.visit(fn);
  q2_target_.visit(fn);
  fn(log_alpha_);
}

}  // namespace rbrl
