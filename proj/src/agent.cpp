#include "rbrl/agent.hpp"

#include "json.hpp"

#include "rbrl/csv.hpp"
#include "rbrl/text.hpp"

#include <cmath>
#include <cstdio>
#include <future>

namespace rbrl {

using nlohmann::json;

Variant variant_from_string(const std::string& s) {
  const std::string t = to_lower(trim(s));
  if (t == "rbrl") return Variant::kRbrl;
  if (t == "tbrl") return Variant::kTbrl;
  if (t == "rules" || t == "rules-only" || t == "rules_only") return Variant::kRulesOnly;
  if (t == "cot") return Variant::kCot;
  if (t == "random" || t == "random-rule" || t == "random_rule") return Variant::kRandomRule;
  throw ConfigError("unknown variant: " + s);
}

std::string variant_to_string(Variant v) {
  switch (v) {
    case Variant::kRbrl: return "rbrl";
    case Variant::kTbrl: return "tbrl";
    case Variant::kRulesOnly: return "rules-only";
    case Variant::kCot: return "cot";
    case Variant::kRandomRule: return "random-rule";
  }
  return "?";
}

bool variant_trains(Variant v) { return v == Variant::kRbrl || v == Variant::kTbrl; }

bool variant_uses_rules(Variant v) {
  return v == Variant::kRbrl || v == Variant::kRulesOnly || v == Variant::kRandomRule;
}

void AgentConfig::validate() const {
  if (num_envs < 1) throw ConfigError("agent: num_envs must be >= 1");
  if (total_env_steps < 0) throw ConfigError("agent: total_env_steps must be >= 0");
  if (rule_reward_coef < 0.0) throw ConfigError("agent: rule_reward_coef must be >= 0");
  if (explain_every < 0) throw ConfigError("agent: explain_every must be >= 0");
}

// ---------------------------------------------------------------------------

struct Agent::Worker {
  int id = 0;
  EnvPtr env;
  std::shared_ptr<Gateway> gw;
  Rng action_rng;  // fallback draws inside the gateway
  long long episode = 0;
  int step_in_episode = 0;
  double ep_env_return = 0.0;
  double ep_combined_return = 0.0;
  Vec state_vec;
  bool has_pending = false;
  Transition pending;
};

struct Agent::PhaseA {
  PromptBundle bundle;
  std::string thought;
  std::vector<RuleText> rules;
  std::vector<std::string> candidates;  // thought-level variant
  Mat embeddings;                       // (q, embed_dim); empty for cot
  bool rules_padded = false;
};

struct Agent::PhaseC {
  int action = 0;
  bool fallback = false;
  StepOutcome out;
  JudgeScores judge;
  double rule_reward = 0.0;
  double combined_reward = 0.0;
  std::string explanation;
};

namespace {

json rule_to_json(const RuleText& r) {
  return json{{"background", r.background},
              {"rule_statement", r.rule_statement},
              {"state_relevance", r.state_relevance}};
}

class JsonlLog {
 public:
  explicit JsonlLog(const std::string& path) {
    if (!path.empty()) {
      f_ = std::fopen(path.c_str(), "w");
      if (!f_) throw ConfigError("agent: cannot open log file: " + path);
    }
  }
  ~JsonlLog() {
    if (f_) std::fclose(f_);
  }
  void write(const json& j) {
    if (!f_) return;
    const std::string line = j.dump();
    std::fwrite(line.data(), 1, line.size(), f_);
    std::fputc('\n', f_);
    std::fflush(f_);
  }
  explicit operator bool() const { return f_ != nullptr; }

 private:
  FILE* f_ = nullptr;
};

const std::vector<std::string> kMetricColumns = {
    "global_step",   "env_id",          "episode",         "step_in_episode",
    "env_reward",    "rule_reward",     "combined_reward", "er1",
    "er2",           "er3",             "chosen",          "action",
    "fallback",      "terminated",      "truncated",       "episode_env_return",
    "episode_return", "critic_loss",    "actor_loss",      "entropy",
    "alpha",         "buffer_size"};

}  // namespace

Agent::Agent(const AgentConfig& cfg, const GatewayConfig& gw_cfg,
             const EmbeddingConfig& emb_cfg, NetConfig net_cfg, const SacConfig& sac_cfg,
             EnvFactory env_factory, BackendFactory backend_factory)
    : cfg_(cfg),
      gw_cfg_(gw_cfg),
      emb_cfg_(emb_cfg),
      net_cfg_(net_cfg),
      sac_cfg_(sac_cfg),
      env_factory_(std::move(env_factory)),
      backend_factory_(std::move(backend_factory)),
      policy_rng_(derive_seed(cfg.seed, 0xa0, 0, 0)),
      train_rng_(derive_seed(cfg.seed, 0xa1, 0, 0)) {
  cfg_.validate();
  if (net_cfg_.embed_dim != emb_cfg_.dim)
    throw ConfigError("agent: net embed_dim must match the embedder dim");
  embedder_ = make_embedder(emb_cfg_);

  for (int i = 0; i < cfg_.num_envs; ++i) {
    auto w = std::make_unique<Worker>();
    w->id = i;
    w->env = env_factory_();
    w->gw = std::make_shared<Gateway>(gw_cfg_, backend_factory_());
    w->action_rng = Rng(derive_seed(cfg_.seed, 0xa2, i, 0));
    workers_.push_back(std::move(w));
    gateways_.push_back(workers_.back()->gw);
  }

  net_cfg_.state_dim = workers_[0]->env->spec().state_dim;
  net_cfg_.validate();
  if (variant_trains(cfg_.variant)) {
    trainer_ = std::make_unique<SacTrainer>(net_cfg_, sac_cfg_, derive_seed(cfg_.seed, 0xa3, 0, 0));
    buffer_ = std::make_unique<ReplayBuffer>(sac_cfg_.buffer_size);
  }

  for (auto& w : workers_) start_episode(*w);
}

void Agent::start_episode(Worker& w) {
  const NumericState s =
      w.env->reset(derive_seed(cfg_.seed, 0xe0 + static_cast<uint64_t>(w.id), w.episode, 0));
  w.gw->backend().seed_episode(
      derive_seed(cfg_.seed, 0xe0 + static_cast<uint64_t>(w.id), w.episode, 1));
  w.state_vec = s.values;
  w.step_in_episode = 0;
  w.ep_env_return = 0.0;
  w.ep_combined_return = 0.0;
}

Mat Agent::embed_rules(const std::vector<RuleText>& rules) {
  Mat m(static_cast<int>(rules.size()), emb_cfg_.dim);
  for (size_t i = 0; i < rules.size(); ++i)
    m.row(static_cast<int>(i)) = embedder_->embed(rule_display(rules[i])).transpose();
  return m;
}

Agent::~Agent() = default;

Mat Agent::embed_texts(const std::vector<std::string>& texts) {
  Mat m(static_cast<int>(texts.size()), emb_cfg_.dim);
  for (size_t i = 0; i < texts.size(); ++i)
    m.row(static_cast<int>(i)) = embedder_->embed(texts[i]).transpose();
  return m;
}

Agent::PhaseA Agent::language_phase(Worker& w) {
  PhaseA a;
  a.bundle = w.gw->bundle(*w.env);
  switch (cfg_.variant) {
    case Variant::kRbrl:
    case Variant::kRulesOnly:
    case Variant::kRandomRule: {
      a.thought = w.gw->thought(a.bundle);
      RuleSet rs = w.gw->rules(a.bundle, a.thought, *w.env);
      a.rules = rs.rules;
      a.rules_padded = rs.padded;
      a.embeddings = embed_rules(a.rules);
      break;
    }
    case Variant::kTbrl: {
      a.candidates = w.gw->candidates(a.bundle, *w.env);
      a.rules.reserve(a.candidates.size());
      for (const auto& c : a.candidates) a.rules.push_back(RuleText{"", c, ""});
      a.embeddings = embed_texts(a.candidates);
      break;
    }
    case Variant::kCot: {
      a.thought = w.gw->thought(a.bundle);
      break;
    }
  }
  return a;
}

Agent::PhaseC Agent::action_phase(Worker& w, const PhaseA& a, int chosen) {
  PhaseC c;
  switch (cfg_.variant) {
    case Variant::kRbrl:
    case Variant::kRulesOnly:
    case Variant::kRandomRule:
      c.action = w.gw->action(a.bundle, a.thought, a.rules[chosen], *w.env, w.action_rng,
                              &c.fallback);
      break;
    case Variant::kTbrl:
      c.action = w.gw->action_from_thought(a.bundle, a.candidates[chosen], *w.env, w.action_rng,
                                           &c.fallback);
      break;
    case Variant::kCot:
      c.action =
          w.gw->action_from_thought(a.bundle, a.thought, *w.env, w.action_rng, &c.fallback);
      break;
  }
  c.out = w.env->step(c.action);
  if (variant_uses_rules(cfg_.variant)) {
    c.judge = w.gw->judge(a.bundle, a.rules[chosen], c.action, *w.env);
    c.rule_reward = c.judge.rule_reward();
  }
  c.combined_reward = c.out.reward + cfg_.rule_reward_coef * c.rule_reward;
  return c;
}

const GatewayStats Agent::combined_gateway_stats() const {
  GatewayStats total;
  for (const auto& gw : gateways_) {
    total.action_fallbacks += gw->stats().action_fallbacks;
    total.padded_rule_sets += gw->stats().padded_rule_sets;
    total.judge_unparsed += gw->stats().judge_unparsed;
    total.select_fallbacks += gw->stats().select_fallbacks;
  }
  return total;
}

void Agent::train() {
  JsonlLog log(cfg_.log_path);
  std::unique_ptr<CsvWriter> metrics;
  if (!cfg_.metrics_path.empty())
    metrics = std::make_unique<CsvWriter>(cfg_.metrics_path, kMetricColumns);

  if (log) {
    json header;
    header["type"] = "header";
    header["variant"] = variant_to_string(cfg_.variant);
    header["seed"] = cfg_.seed;
    header["num_envs"] = cfg_.num_envs;
    header["rule_reward_coef"] = cfg_.rule_reward_coef;
    header["total_env_steps"] = cfg_.total_env_steps;
    header["env"] = workers_[0]->env->spec().id;
    header["backend"] = workers_[0]->gw->backend().name();
    header["templates_sha256"] = workers_[0]->gw->templates_hash();
    header["embed_dim"] = emb_cfg_.dim;
    log.write(header);
  }

  const double nan = std::nan("");
  while (global_step_ < cfg_.total_env_steps) {
    // Phase A (parallel): prompts, thoughts, rules, embeddings.
    std::vector<std::future<PhaseA>> fa;
    fa.reserve(workers_.size());
    for (auto& w : workers_)
      fa.push_back(std::async(std::launch::async,
                              [this, &w] { return language_phase(*w); }));
    std::vector<PhaseA> va;
    va.reserve(workers_.size());
    for (auto& f : fa) va.push_back(f.get());

    // Phase B (sequential, worker order): finalize pending transitions
    // against the fresh rule set, then pick a rule for each worker.
    std::vector<int> chosen(workers_.size(), -1);
    for (size_t i = 0; i < workers_.size(); ++i) {
      Worker& w = *workers_[i];
      if (w.has_pending) {
        w.pending.next_state = w.state_vec;
        w.pending.next_rules = va[i].embeddings;
        buffer_->add(std::move(w.pending));
        w.has_pending = false;
      }
      switch (cfg_.variant) {
        case Variant::kRbrl:
        case Variant::kTbrl:
          chosen[i] = trainer_->act_sample(w.state_vec, va[i].embeddings, policy_rng_);
          break;
        case Variant::kRulesOnly: {
          RuleSet rs;
          rs.rules = va[i].rules;
          chosen[i] = w.gw->select_rule(va[i].bundle, va[i].thought, rs, w.action_rng);
          break;
        }
        case Variant::kRandomRule:
          chosen[i] = policy_rng_.uniform_int(0, static_cast<int>(va[i].rules.size()) - 1);
          break;
        case Variant::kCot:
          chosen[i] = -1;
          break;
      }
    }

    // Phase C (parallel): act, step the environment, judge.
    std::vector<std::future<PhaseC>> fc;
    fc.reserve(workers_.size());
    for (size_t i = 0; i < workers_.size(); ++i) {
      Worker* wp = workers_[i].get();
      const PhaseA* ap = &va[i];
      const int ch = chosen[i];
      fc.push_back(std::async(std::launch::async,
                              [this, wp, ap, ch] { return action_phase(*wp, *ap, ch); }));
    }
    std::vector<PhaseC> vc;
    vc.reserve(workers_.size());
    for (auto& f : fc) vc.push_back(f.get());

    // Phase D (sequential): bookkeeping, transitions, logging, episodes.
    TrainMetrics tm;
    bool trained = false;
    for (size_t i = 0; i < workers_.size(); ++i) {
      Worker& w = *workers_[i];
      const PhaseA& a = va[i];
      PhaseC& c = vc[i];
      ++global_step_;
      w.ep_env_return += c.out.reward;
      w.ep_combined_return += c.combined_reward;

      if (cfg_.explain_every > 0 && global_step_ % cfg_.explain_every == 0 &&
          variant_uses_rules(cfg_.variant)) {
        c.explanation =
            w.gw->explanation(a.bundle, a.thought, a.rules[chosen[i]], c.action, *w.env);
      }

      if (variant_trains(cfg_.variant)) {
        Transition t;
        t.state = w.state_vec;
        t.rules = a.embeddings;
        t.chosen = chosen[i];
        t.reward = c.combined_reward;
        t.done = c.out.terminated;
        if (c.out.done()) {
          t.next_state = c.out.next_state.values;
          if (c.out.terminated) {
            t.next_rules = a.embeddings;  // unused: the target is masked
          } else {
            // Time-limit truncation still bootstraps, so fetch candidate
            // rules for the terminal state.
            PromptBundle b2 = w.gw->bundle(*w.env, c.out.next_state);
            if (cfg_.variant == Variant::kTbrl) {
              t.next_rules = embed_texts(w.gw->candidates(b2, *w.env));
            } else {
              std::string th2 = w.gw->thought(b2);
              t.next_rules = embed_rules(w.gw->rules(b2, th2, *w.env).rules);
            }
          }
          buffer_->add(std::move(t));
        } else {
          w.pending = std::move(t);
          w.has_pending = true;
        }
      }

      if (log) {
        json j;
        j["type"] = "step";
        j["env_id"] = w.id;
        j["global_step"] = global_step_;
        j["episode"] = w.episode;
        j["step_in_episode"] = w.step_in_episode;
        j["state_sha256"] = sha256_hex(a.bundle.state_text);
        j["state_text"] = a.bundle.state_text;
        j["thought"] = a.thought;
        json jr = json::array();
        for (const auto& r : a.rules) jr.push_back(rule_to_json(r));
        j["rules"] = jr;
        j["rules_padded"] = a.rules_padded;
        j["chosen"] = chosen[i];
        j["action"] = c.action;
        j["action_fallback"] = c.fallback;
        j["er"] = {c.judge.er1, c.judge.er2, c.judge.er3};
        j["judge_unparsed"] = c.judge.unparsed;
        j["rule_reward"] = c.rule_reward;
        j["env_reward"] = c.out.reward;
        j["combined_reward"] = c.combined_reward;
        j["terminated"] = c.out.terminated;
        j["truncated"] = c.out.truncated;
        if (!c.explanation.empty()) j["explanation"] = c.explanation;
        if (!c.out.note.empty()) j["note"] = c.out.note;
        log.write(j);
      }

      const bool done = c.out.done();
      if (metrics) {
        metrics->write_row({static_cast<double>(global_step_), static_cast<double>(w.id),
                            static_cast<double>(w.episode),
                            static_cast<double>(w.step_in_episode), c.out.reward, c.rule_reward,
                            c.combined_reward, static_cast<double>(c.judge.er1),
                            static_cast<double>(c.judge.er2), static_cast<double>(c.judge.er3),
                            static_cast<double>(chosen[i]), static_cast<double>(c.action),
                            c.fallback ? 1.0 : 0.0, c.out.terminated ? 1.0 : 0.0,
                            c.out.truncated ? 1.0 : 0.0, done ? w.ep_env_return : nan,
                            done ? w.ep_combined_return : nan, nan, nan, nan, nan,
                            buffer_ ? static_cast<double>(buffer_->size()) : 0.0});
      }

      if (done) {
        if (log) {
          json j;
          j["type"] = "episode";
          j["env_id"] = w.id;
          j["episode"] = w.episode;
          j["steps"] = w.step_in_episode + 1;
          j["env_return"] = w.ep_env_return;
          j["combined_return"] = w.ep_combined_return;
          log.write(j);
        }
        ++w.episode;
        start_episode(w);
      } else {
        w.state_vec = w.env->state().values;
        ++w.step_in_episode;
      }
    }

    if (variant_trains(cfg_.variant)) {
      tm = trainer_->train_step(*buffer_, train_rng_);
      trained = tm.updates > 0;
    }
    if (metrics && trained) {
      metrics->write_row({static_cast<double>(global_step_), -1.0, nan, nan, nan, nan, nan, nan,
                          nan, nan, nan, nan, nan, nan, nan, nan, nan, tm.critic_loss,
                          tm.actor_loss, tm.entropy, tm.alpha,
                          static_cast<double>(buffer_->size())});
    }
  }
}

EvalResult Agent::evaluate(int episodes, uint64_t eval_seed, bool greedy,
                           bool with_explanations) {
  EvalResult res;
  res.episodes = episodes;
  Worker w;
  w.id = -1;
  w.env = env_factory_();
  w.gw = std::make_shared<Gateway>(gw_cfg_, backend_factory_());
  w.action_rng = Rng(derive_seed(eval_seed, 0xeb, 0, 0));
  Rng select_rng(derive_seed(eval_seed, 0xec, 0, 0));

  std::vector<double> env_returns;
  double rr_sum = 0, er1 = 0, er2 = 0, er3 = 0;
  long long judged = 0, oracle_steps = 0, oracle_hits = 0;

  for (int ep = 0; ep < episodes; ++ep) {
    NumericState s = w.env->reset(derive_seed(eval_seed, 0xed, ep, 0));
    w.gw->backend().seed_episode(derive_seed(eval_seed, 0xed, ep, 1));
    w.state_vec = s.values;
    w.step_in_episode = 0;
    double ep_return = 0.0;

    while (true) {
      PhaseA a = language_phase(w);
      int chosen = -1;
      switch (cfg_.variant) {
        case Variant::kRbrl:
        case Variant::kTbrl:
          chosen = greedy ? trainer_->act_greedy(w.state_vec, a.embeddings)
                          : trainer_->act_sample(w.state_vec, a.embeddings, select_rng);
          break;
        case Variant::kRulesOnly: {
          RuleSet rs;
          rs.rules = a.rules;
          chosen = w.gw->select_rule(a.bundle, a.thought, rs, w.action_rng);
          break;
        }
        case Variant::kRandomRule:
          chosen = select_rng.uniform_int(0, static_cast<int>(a.rules.size()) - 1);
          break;
        case Variant::kCot:
          break;
      }
      const auto oracle = w.env->oracle_action(w.env->state());
      PhaseC c = action_phase(w, a, chosen);
      if (oracle) {
        ++oracle_steps;
        if (*oracle == c.action) ++oracle_hits;
      }
      if (with_explanations) {
        // Rule variants justify via the chosen rule; the free-form variants
        // fall back to quoting their own analysis as the decision basis.
        const RuleText basis = (chosen >= 0 && !a.rules.empty())
                                   ? a.rules[chosen]
                                   : RuleText{"", a.thought, ""};
        c.explanation = w.gw->explanation(a.bundle, a.thought, basis, c.action, *w.env);
      }

      StepRecord rec;
      rec.env_id = -1;
      rec.global_step = res.steps;
      rec.episode = ep;
      rec.step_in_episode = w.step_in_episode;
      rec.state_text = a.bundle.state_text;
      rec.thought = a.thought;
      rec.rules = a.rules;
      rec.chosen = chosen;
      rec.action = c.action;
      rec.action_fallback = c.fallback;
      rec.judge = c.judge;
      rec.rule_reward = c.rule_reward;
      rec.env_reward = c.out.reward;
      rec.combined_reward = c.combined_reward;
      rec.terminated = c.out.terminated;
      rec.truncated = c.out.truncated;
      rec.explanation = c.explanation;
      res.records.push_back(std::move(rec));

      ++res.steps;
      ep_return += c.out.reward;
      res.mean_return += c.combined_reward;
      if (variant_uses_rules(cfg_.variant)) {
        rr_sum += c.rule_reward;
        er1 += c.judge.er1;
        er2 += c.judge.er2;
        er3 += c.judge.er3;
        ++judged;
      }
      if (c.out.done()) break;
      w.state_vec = w.env->state().values;
      ++w.step_in_episode;
    }
    env_returns.push_back(ep_return);
  }

  double mean = 0.0;
  for (double r : env_returns) mean += r / episodes;
  double var = 0.0;
  for (double r : env_returns) var += (r - mean) * (r - mean);
  var = episodes > 1 ? var / (episodes - 1) : 0.0;
  res.mean_env_return = mean;
  res.se_return = episodes > 1 ? std::sqrt(var / episodes) : 0.0;
  res.mean_return = res.steps ? res.mean_return / res.steps : 0.0;
  res.mean_rule_reward = judged ? rr_sum / judged : 0.0;
  res.mean_er1 = judged ? er1 / judged : 0.0;
  res.mean_er2 = judged ? er2 / judged : 0.0;
  res.mean_er3 = judged ? er3 / judged : 0.0;
  res.optimal_rate = oracle_steps ? static_cast<double>(oracle_hits) / oracle_steps : 0.0;
  return res;
}

}  // namespace rbrl
