#include "rbrl/ppo.hpp"

#include "rbrl/csv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rbrl {

void PpoConfig::validate() const {
  if (learning_rate <= 0) throw ConfigError("ppo: learning_rate must be positive");
  if (num_envs <= 0) throw ConfigError("ppo: num_envs must be positive");
  if (num_steps <= 0) throw ConfigError("ppo: num_steps must be positive");
  if (gamma < 0 || gamma > 1) throw ConfigError("ppo: gamma must lie in [0, 1]");
  if (gae_lambda < 0 || gae_lambda > 1) throw ConfigError("ppo: gae_lambda must lie in [0, 1]");
  if (clip_coef <= 0) throw ConfigError("ppo: clip_coef must be positive");
  if (num_minibatches <= 0) throw ConfigError("ppo: num_minibatches must be positive");
  if (update_epochs <= 0) throw ConfigError("ppo: update_epochs must be positive");
  if (num_steps * num_envs % num_minibatches != 0)
    throw ConfigError("ppo: rollout size must divide evenly into minibatches");
  if (max_grad_norm <= 0) throw ConfigError("ppo: max_grad_norm must be positive");
  if (hidden_dim <= 0 || num_hidden_layers <= 0) throw ConfigError("ppo: bad network shape");
  if (total_timesteps <= 0) throw ConfigError("ppo: total_timesteps must be positive");
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(const std::string& name, int in, int hidden, int hidden_layers, int out, Rng& rng) {
  int d = in;
  for (int i = 0; i < hidden_layers; ++i) {
    layers_.emplace_back(name + ".l" + std::to_string(i), d, hidden, rng);
    d = hidden;
  }
  layers_.emplace_back(name + ".head", d, out, rng, /*zero_bias=*/true);
  act_.resize(layers_.size() > 0 ? layers_.size() - 1 : 0);
}

Mat Mlp::forward(const Mat& x) {
  Mat h = x;
  for (size_t i = 0; i + 1 < layers_.size(); ++i) {
    h = layers_[i].forward(h).array().tanh().matrix();
    act_[i] = h;
  }
  return layers_.back().forward(h);
}

Mat Mlp::backward(const Mat& dy) {
  Mat d = layers_.back().backward(dy);
  for (size_t i = layers_.size() - 1; i-- > 0;) {
    d = d.cwiseProduct(Mat::Ones(d.rows(), d.cols()) - act_[i].cwiseProduct(act_[i]));
    d = layers_[i].backward(d);
  }
  return d;
}

void Mlp::visit(const ParamVisitor& fn) {
  for (auto& l : layers_) l.visit(fn);
}

// ---------------------------------------------------------------------------
// GAE

Vec whiten(const Vec& x) {
  const double n = static_cast<double>(x.size());
  const double mean = x.mean();
  const double var = (x.array() - mean).square().sum() / n;
  return ((x.array() - mean) / (std::sqrt(var) + 1e-8)).matrix();
}

GaeOut gae(const Vec& rewards, const Vec& values, const std::vector<uint8_t>& dones,
           double bootstrap_value, double gamma, double lambda) {
  const int T = static_cast<int>(rewards.size());
  if (values.size() != T || static_cast<int>(dones.size()) != T)
    throw ConfigError("gae: rewards, values, and dones must have equal length");
  GaeOut out;
  out.advantages = Vec::Zero(T);
  out.returns = Vec::Zero(T);
  double lastgaelam = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    const double nonterminal = dones[t] ? 0.0 : 1.0;
    const double next_value = (t == T - 1) ? bootstrap_value : values[t + 1];
    const double delta = rewards[t] + gamma * next_value * nonterminal - values[t];
    lastgaelam = delta + gamma * lambda * nonterminal * lastgaelam;
    out.advantages[t] = lastgaelam;
  }
  out.returns = out.advantages + values;
  return out;
}

// ---------------------------------------------------------------------------
// Clipped objective

namespace {

// Row-wise log-softmax with max subtraction.
Mat log_softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (int i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = std::log((logits.row(i).array() - mx).exp().sum()) + mx;
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

}  // namespace

PpoLosses ppo_losses(const PpoBatch& b, const PpoConfig& cfg, Mat* dlogits, Vec* dvalues) {
  const int B = static_cast<int>(b.logits.rows());
  const int A = static_cast<int>(b.logits.cols());
  if (static_cast<int>(b.actions.size()) != B || b.values.size() != B ||
      b.old_logp.size() != B || b.old_values.size() != B || b.advantages.size() != B ||
      b.returns.size() != B)
    throw ConfigError("ppo_losses: batch arrays disagree on length");

  const Vec adv = cfg.norm_adv ? whiten(b.advantages) : b.advantages;

  const Mat logp = log_softmax_rows(b.logits);
  const Mat probs = logp.array().exp().matrix();
  const double eps = cfg.clip_coef;

  if (dlogits) *dlogits = Mat::Zero(B, A);
  if (dvalues) *dvalues = Vec::Zero(B);

  PpoLosses out;
  for (int i = 0; i < B; ++i) {
    const int a = b.actions[i];
    const double lp = logp(i, a);
    const double logratio = lp - b.old_logp[i];
    const double ratio = std::exp(logratio);
    out.approx_kl += (ratio - 1.0) - logratio;
    if (std::abs(ratio - 1.0) > eps) out.clipfrac += 1.0;

    // Policy term: max of the unclipped and clipped surrogate (sign-flipped
    // so this is a loss). The clipped branch is flat in the logits whenever
    // the clamp is binding.
    const double clipped_ratio = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
    const double lu = -adv[i] * ratio;
    const double lc = -adv[i] * clipped_ratio;
    out.policy_loss += std::max(lu, lc);
    // d(policy term)/d lp, before the 1/B; the clipped branch only wins when
    // the clamp binds, which makes it flat in the logits.
    const double dlp = (lu >= lc) ? -adv[i] * ratio : 0.0;

    // Entropy bonus.
    double H = 0.0;
    for (int k = 0; k < A; ++k) {
      const double p = probs(i, k);
      if (p > 0) H -= p * logp(i, k);
    }
    out.entropy += H;

    // Value term, optionally clipped around the rollout-time estimate.
    const double v = b.values[i];
    const double ret = b.returns[i];
    double v_loss_i, dv = 0.0;
    if (cfg.clip_vloss) {
      const double vu = (v - ret) * (v - ret);
      const double v_clipped =
          b.old_values[i] + std::clamp(v - b.old_values[i], -eps, eps);
      const double vc = (v_clipped - ret) * (v_clipped - ret);
      v_loss_i = 0.5 * std::max(vu, vc);
      if (vu >= vc) {
        dv = v - ret;
      } else if (std::abs(v - b.old_values[i]) < eps) {
        dv = v_clipped - ret;
      }
    } else {
      v_loss_i = 0.5 * (v - ret) * (v - ret);
      dv = v - ret;
    }
    out.value_loss += v_loss_i;

    if (dlogits) {
      for (int k = 0; k < A; ++k) {
        const double ind = (k == a) ? 1.0 : 0.0;
        const double d_pg = dlp * (ind - probs(i, k));
        const double d_ent = -probs(i, k) * (logp(i, k) + H);  // dH/dz_k
        (*dlogits)(i, k) = (d_pg - cfg.ent_coef * d_ent) / B;
      }
    }
    if (dvalues) (*dvalues)[i] = cfg.vf_coef * dv / B;
  }

  out.policy_loss /= B;
  out.value_loss /= B;
  out.entropy /= B;
  out.approx_kl /= B;
  out.clipfrac /= B;
  out.total = out.policy_loss - cfg.ent_coef * out.entropy + cfg.vf_coef * out.value_loss;
  return out;
}

// ---------------------------------------------------------------------------
// Trainer

PpoTrainer::PpoTrainer(int state_dim, int num_actions, const PpoConfig& cfg, uint64_t seed)
    : cfg_(cfg), state_dim_(state_dim), num_actions_(num_actions),
      rng_(derive_seed(seed, 0x99a0, 0, 0)), seed_(seed) {
  cfg_.validate();
  if (state_dim <= 0 || num_actions <= 0) throw ConfigError("ppo: bad state/action dims");
  Rng init_actor(derive_seed(seed, 0x99a1, 0, 0));
  Rng init_critic(derive_seed(seed, 0x99a2, 0, 0));
  actor_ = Mlp("ppo.actor", state_dim, cfg_.hidden_dim, cfg_.num_hidden_layers, num_actions,
               init_actor);
  critic_ = Mlp("ppo.critic", state_dim, cfg_.hidden_dim, cfg_.num_hidden_layers, 1, init_critic);
  std::vector<Param*> params;
  auto collect = [&](Param& p) { params.push_back(&p); };
  actor_.visit(collect);
  critic_.visit(collect);
  opt_ = Adam(params, cfg_.learning_rate, 0.9, 0.999, 1e-5);
}

Vec PpoTrainer::policy_probs(const Vec& state) {
  Mat logits = actor_.forward(state.transpose());
  Mat lp = log_softmax_rows(logits);
  return lp.row(0).array().exp().matrix().transpose();
}

double PpoTrainer::value(const Vec& state) { return critic_.forward(state.transpose())(0, 0); }

int PpoTrainer::act_sample(const Vec& state, Rng& rng, double* logp, double* val) {
  Vec p = policy_probs(state);
  double u = rng.uniform();
  int a = 0;
  double acc = 0.0;
  for (int k = 0; k < p.size(); ++k) {
    acc += p[k];
    if (u <= acc) {
      a = k;
      break;
    }
    a = k;  // fall through to the last action on rounding leftovers
  }
  if (logp) *logp = std::log(std::max(p[a], 1e-300));
  if (val) *val = value(state);
  return a;
}

int PpoTrainer::act_greedy(const Vec& state) {
  Vec p = policy_probs(state);
  int best = 0;
  p.maxCoeff(&best);
  return best;
}

PpoLosses PpoTrainer::update_minibatch(const Mat& states, const std::vector<int>& actions,
                                       const Vec& old_logp, const Vec& old_values,
                                       const Vec& advantages, const Vec& returns,
                                       double* grad_norm) {
  PpoBatch b;
  b.logits = actor_.forward(states);
  b.values = critic_.forward(states).col(0);
  b.actions = actions;
  b.old_logp = old_logp;
  b.old_values = old_values;
  b.advantages = advantages;
  b.returns = returns;

  Mat dlogits;
  Vec dvalues;
  PpoLosses losses = ppo_losses(b, cfg_, &dlogits, &dvalues);

  opt_.zero_grad();
  actor_.backward(dlogits);
  critic_.backward(Mat(dvalues));

  double sq = 0.0;
  for (Param* p : opt_.params()) sq += p->g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (grad_norm) *grad_norm = norm;
  if (norm > cfg_.max_grad_norm && norm > 0) {
    const double scale = cfg_.max_grad_norm / norm;
    for (Param* p : opt_.params()) p->g *= scale;
  }
  opt_.step();
  return losses;
}

PpoRunStats PpoTrainer::train(const std::function<EnvPtr()>& make_env,
                              const std::string& metrics_path) {
  const int N = cfg_.num_envs;
  const int T = cfg_.num_steps;
  const int B = N * T;
  const long long num_updates = std::max<long long>(1, cfg_.total_timesteps / B);

  std::unique_ptr<CsvWriter> metrics;
  if (!metrics_path.empty()) {
    const std::vector<std::string> cols = {"global_step", "update",   "lr",
                                           "policy_loss", "value_loss", "entropy",
                                           "approx_kl",   "clipfrac",   "grad_norm",
                                           "episodes",    "mean_episode_return"};
    metrics = std::make_unique<CsvWriter>(metrics_path, cols);
  }

  std::vector<EnvPtr> envs;
  std::vector<Vec> obs(N);
  std::vector<long long> episode(N, 0);
  std::vector<double> ep_return(N, 0.0);
  for (int i = 0; i < N; ++i) {
    envs.push_back(make_env());
    obs[i] = envs[i]->reset(derive_seed(seed_, 0x99e0 + i, 0, 0)).values;
  }

  PpoRunStats stats;
  const double lr0 = cfg_.learning_rate;

  for (long long update = 1; update <= num_updates; ++update) {
    if (cfg_.anneal_lr) {
      const double frac = 1.0 - static_cast<double>(update - 1) / num_updates;
      opt_.set_lr(frac * lr0);
    }

    // Rollout storage, time-major per environment.
    std::vector<Mat> states(N, Mat(T, state_dim_));
    std::vector<std::vector<int>> actions(N, std::vector<int>(T));
    std::vector<Vec> logps(N, Vec(T)), vals(N, Vec(T)), rews(N, Vec(T));
    std::vector<std::vector<uint8_t>> dones(N, std::vector<uint8_t>(T));
    std::vector<double> finished_returns;

    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < N; ++i) {
        states[i].row(t) = obs[i].transpose();
        double lp, v;
        const int a = act_sample(obs[i], rng_, &lp, &v);
        actions[i][t] = a;
        logps[i][t] = lp;
        vals[i][t] = v;
        StepOutcome out = envs[i]->step(a);
        rews[i][t] = out.reward;
        ep_return[i] += out.reward;
        const bool done = out.done();
        dones[i][t] = done ? 1 : 0;
        ++stats.steps;
        if (done) {
          finished_returns.push_back(ep_return[i]);
          ep_return[i] = 0.0;
          ++episode[i];
          ++stats.episodes;
          obs[i] = envs[i]->reset(derive_seed(seed_, 0x99e0 + i, episode[i], 0)).values;
        } else {
          obs[i] = out.next_state.values;
        }
      }
    }

    // Flatten rollouts with per-env GAE.
    Mat all_states(B, state_dim_);
    std::vector<int> all_actions(B);
    Vec all_logp(B), all_values(B), all_adv(B), all_ret(B);
    for (int i = 0; i < N; ++i) {
      const double bootstrap = dones[i][T - 1] ? 0.0 : value(obs[i]);
      GaeOut g = gae(rews[i], vals[i], dones[i], bootstrap, cfg_.gamma, cfg_.gae_lambda);
      for (int t = 0; t < T; ++t) {
        const int row = i * T + t;
        all_states.row(row) = states[i].row(t);
        all_actions[row] = actions[i][t];
        all_logp[row] = logps[i][t];
        all_values[row] = vals[i][t];
        all_adv[row] = g.advantages[t];
        all_ret[row] = g.returns[t];
      }
    }

    // Clipped updates over shuffled minibatches.
    std::vector<int> idx(B);
    std::iota(idx.begin(), idx.end(), 0);
    const int mb_size = B / cfg_.num_minibatches;
    PpoLosses last;
    double last_norm = 0.0;
    for (int epoch = 0; epoch < cfg_.update_epochs; ++epoch) {
      for (int k = B - 1; k > 0; --k) std::swap(idx[k], idx[rng_.uniform_int(0, k)]);
      for (int m = 0; m < cfg_.num_minibatches; ++m) {
        Mat mb_states(mb_size, state_dim_);
        std::vector<int> mb_actions(mb_size);
        Vec mb_logp(mb_size), mb_old_v(mb_size), mb_adv(mb_size), mb_ret(mb_size);
        for (int r = 0; r < mb_size; ++r) {
          const int s = idx[m * mb_size + r];
          mb_states.row(r) = all_states.row(s);
          mb_actions[r] = all_actions[s];
          mb_logp[r] = all_logp[s];
          mb_old_v[r] = all_values[s];
          mb_adv[r] = all_adv[s];
          mb_ret[r] = all_ret[s];
        }
        last = update_minibatch(mb_states, mb_actions, mb_logp, mb_old_v, mb_adv, mb_ret,
                                &last_norm);
      }
    }
    ++stats.updates;
    if (!finished_returns.empty()) {
      stats.mean_recent_return =
          std::accumulate(finished_returns.begin(), finished_returns.end(), 0.0) /
          static_cast<double>(finished_returns.size());
    }
    if (metrics) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      metrics->write_row({static_cast<double>(stats.steps), static_cast<double>(update),
                          opt_.lr(), last.policy_loss, last.value_loss, last.entropy,
                          last.approx_kl, last.clipfrac, last_norm,
                          static_cast<double>(stats.episodes),
                          finished_returns.empty() ? nan : stats.mean_recent_return});
    }
  }
  return stats;
}

PpoEvalOut PpoTrainer::evaluate(const std::function<EnvPtr()>& make_env, int episodes,
                                uint64_t seed) {
  PpoEvalOut out;
  EnvPtr env = make_env();
  std::vector<double> returns;
  for (int ep = 0; ep < episodes; ++ep) {
    Vec s = env->reset(derive_seed(seed, 0x99f0, ep, 0)).values;
    double total = 0.0;
    while (true) {
      StepOutcome o = env->step(act_greedy(s));
      total += o.reward;
      ++out.steps;
      if (o.done()) break;
      s = o.next_state.values;
    }
    returns.push_back(total);
  }
  out.episodes = episodes;
  const double n = static_cast<double>(returns.size());
  out.mean_return = std::accumulate(returns.begin(), returns.end(), 0.0) / n;
  if (returns.size() > 1) {
    double var = 0.0;
    for (double r : returns) var += (r - out.mean_return) * (r - out.mean_return);
    var /= (n - 1.0);
    out.se_return = std::sqrt(var / n);
  }
  return out;
}

void PpoTrainer::visit(const ParamVisitor& fn) {
  actor_.visit(fn);
  critic_.visit(fn);
}

void capture_ppo(const std::string& prefix, PpoTrainer& trainer, Checkpoint& ckpt) {
  trainer.visit([&](Param& p) { ckpt.tensors[prefix + p.name] = p.w; });
  capture_adam(prefix + "adam", trainer.opt(), ckpt);
}

void restore_ppo(const std::string& prefix, PpoTrainer& trainer, const Checkpoint& ckpt) {
  trainer.visit([&](Param& p) {
    auto it = ckpt.tensors.find(prefix + p.name);
    if (it == ckpt.tensors.end()) throw ConfigError("checkpoint: missing tensor " + p.name);
    if (it->second.rows() != p.w.rows() || it->second.cols() != p.w.cols())
      throw ConfigError("checkpoint: shape mismatch for " + p.name);
    p.w = it->second;
    p.g.setZero();
  });
  restore_adam(prefix + "adam", trainer.opt(), ckpt);
}

}  // namespace rbrl
