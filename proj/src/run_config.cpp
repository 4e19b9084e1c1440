#include "rbrl/run_config.hpp"

#include <fstream>
#include <sstream>

namespace rbrl {

namespace {

int geti(const toml::Table& t, const std::string& k, int d) {
  return static_cast<int>(t.get_int(k, d));
}

}  // namespace

void RunConfig::validate() const {
  if (env_id != "toy" && env_id != "vitals" && env_id != "heat")
    throw ConfigError("config: unknown env '" + env_id + "'");
  if (backend != "scripted" && backend != "remote")
    throw ConfigError("config: unknown backend '" + backend + "'");
  if (seeds.empty()) throw ConfigError("config: seeds must be non-empty");
  if (variant != "ppo") variant_from_string(variant);  // throws on junk
  gateway.validate();
  embedding.validate();
  sac.validate();
  ppo.validate();
  scripted.validate();
  if (backend == "remote") remote.validate();
  switch (env_id[0]) {
    case 't': toy.validate(); break;
    case 'v': vitals.validate(); break;
    default: heat.validate(); break;
  }
}

EnvFactory RunConfig::env_factory() const {
  if (env_id == "toy") {
    ToyConfig c = toy;
    return [c]() -> EnvPtr { return std::make_unique<ToyEnv>(c); };
  }
  if (env_id == "vitals") {
    VitalsConfig c = vitals;
    return [c]() -> EnvPtr { return std::make_unique<VitalsEnv>(c); };
  }
  HeatConfig c = heat;
  return [c]() -> EnvPtr { return std::make_unique<HeatAlertsEnv>(c); };
}

BackendFactory RunConfig::backend_factory() const {
  if (backend == "scripted") {
    ScriptedOptions opts = scripted;
    return [opts]() -> std::shared_ptr<LlmBackend> {
      return std::make_shared<ScriptedBackend>(opts, 0);
    };
  }
  RemoteLlmConfig rc = remote;
  return [rc]() -> std::shared_ptr<LlmBackend> {
    return std::shared_ptr<LlmBackend>(make_remote_backend(rc));
  };
}

RunConfig run_config_from_toml(const toml::Table& t, std::string raw_text) {
  RunConfig c;
  c.raw_toml = std::move(raw_text);

  c.name = t.get_string("name", c.name);
  c.env_id = t.get_string("env", c.env_id);
  c.variant = t.get_string("variant", c.variant);
  c.backend = t.get_string("backend", c.backend);
  c.out_dir = t.get_string("out_dir", c.out_dir);
  if (t.contains("seeds")) {
    c.seeds.clear();
    for (double s : t.get_double_array("seeds")) c.seeds.push_back(static_cast<uint64_t>(s));
  }

  c.agent.num_envs = geti(t, "agent.num_envs", c.agent.num_envs);
  c.agent.rule_reward_coef = t.get_double("agent.rule_reward_coef", c.agent.rule_reward_coef);
  c.agent.total_env_steps = t.get_int("agent.total_env_steps", c.agent.total_env_steps);
  c.agent.explain_every = geti(t, "agent.explain_every", c.agent.explain_every);

  c.gateway.num_rules = geti(t, "gateway.num_rules", c.gateway.num_rules);
  c.gateway.max_retries = geti(t, "gateway.max_retries", c.gateway.max_retries);
  c.gateway.temperature = t.get_double("gateway.temperature", c.gateway.temperature);
  c.gateway.prompts_dir = t.get_string("gateway.prompts_dir", c.gateway.prompts_dir);

  c.embedding.provider = t.get_string("embedding.provider", c.embedding.provider);
  c.embedding.dim = geti(t, "embedding.dim", c.embedding.dim);
  c.embedding.cache_capacity = geti(t, "embedding.cache_capacity", c.embedding.cache_capacity);
  c.embedding.endpoint = t.get_string("embedding.endpoint", c.embedding.endpoint);
  c.embedding.path = t.get_string("embedding.path", c.embedding.path);
  c.embedding.model = t.get_string("embedding.model", c.embedding.model);
  c.embedding.api_key_env = t.get_string("embedding.api_key_env", c.embedding.api_key_env);
  c.embedding.max_retries = geti(t, "embedding.max_retries", c.embedding.max_retries);
  c.embedding.timeout_sec = geti(t, "embedding.timeout_sec", c.embedding.timeout_sec);

  c.net.embed_dim = c.embedding.dim;
  c.net.hidden_dim = geti(t, "net.hidden_dim", c.net.hidden_dim);
  c.net.n_heads = geti(t, "net.n_heads", c.net.n_heads);
  c.net.cross_layers = geti(t, "net.cross_layers", c.net.cross_layers);
  c.net.self_layers = geti(t, "net.self_layers", c.net.self_layers);
  c.net.dropout = t.get_double("net.dropout", c.net.dropout);
  c.net.clamp_value = t.get_double("net.clamp_value", c.net.clamp_value);

  c.sac.gamma = t.get_double("sac.gamma", c.sac.gamma);
  c.sac.tau = t.get_double("sac.tau", c.sac.tau);
  c.sac.batch_size = geti(t, "sac.batch_size", c.sac.batch_size);
  c.sac.buffer_size = geti(t, "sac.buffer_size", c.sac.buffer_size);
  c.sac.learning_starts = geti(t, "sac.learning_starts", c.sac.learning_starts);
  c.sac.policy_lr = t.get_double("sac.policy_lr", c.sac.policy_lr);
  c.sac.q_lr = t.get_double("sac.q_lr", c.sac.q_lr);
  c.sac.alpha_lr = t.get_double("sac.alpha_lr", c.sac.alpha_lr);
  c.sac.updates_per_step = geti(t, "sac.updates_per_step", c.sac.updates_per_step);
  c.sac.target_network_frequency =
      geti(t, "sac.target_network_frequency", c.sac.target_network_frequency);
  c.sac.alpha = t.get_double("sac.alpha", c.sac.alpha);
  c.sac.autotune = t.get_bool("sac.autotune", c.sac.autotune);
  c.sac.target_entropy_scale =
      t.get_double("sac.target_entropy_scale", c.sac.target_entropy_scale);

  c.ppo.learning_rate = t.get_double("ppo.learning_rate", c.ppo.learning_rate);
  c.ppo.num_envs = geti(t, "ppo.num_envs", c.ppo.num_envs);
  c.ppo.num_steps = geti(t, "ppo.num_steps", c.ppo.num_steps);
  c.ppo.anneal_lr = t.get_bool("ppo.anneal_lr", c.ppo.anneal_lr);
  c.ppo.gamma = t.get_double("ppo.gamma", c.ppo.gamma);
  c.ppo.gae_lambda = t.get_double("ppo.gae_lambda", c.ppo.gae_lambda);
  c.ppo.num_minibatches = geti(t, "ppo.num_minibatches", c.ppo.num_minibatches);
  c.ppo.update_epochs = geti(t, "ppo.update_epochs", c.ppo.update_epochs);
  c.ppo.norm_adv = t.get_bool("ppo.norm_adv", c.ppo.norm_adv);
  c.ppo.clip_coef = t.get_double("ppo.clip_coef", c.ppo.clip_coef);
  c.ppo.clip_vloss = t.get_bool("ppo.clip_vloss", c.ppo.clip_vloss);
  c.ppo.ent_coef = t.get_double("ppo.ent_coef", c.ppo.ent_coef);
  c.ppo.vf_coef = t.get_double("ppo.vf_coef", c.ppo.vf_coef);
  c.ppo.max_grad_norm = t.get_double("ppo.max_grad_norm", c.ppo.max_grad_norm);
  c.ppo.total_timesteps = t.get_int("ppo.total_timesteps", c.ppo.total_timesteps);
  c.ppo.hidden_dim = geti(t, "ppo.hidden_dim", c.ppo.hidden_dim);
  c.ppo.num_hidden_layers = geti(t, "ppo.num_hidden_layers", c.ppo.num_hidden_layers);

  c.scripted.toy_rules = t.get_string("scripted.toy_rules", c.scripted.toy_rules);
  c.scripted.toy_offset_hint = geti(t, "scripted.toy_offset_hint", c.scripted.toy_offset_hint);
  c.scripted.thought_accuracy =
      t.get_double("scripted.thought_accuracy", c.scripted.thought_accuracy);

  c.remote.endpoint = t.get_string("remote.endpoint", c.remote.endpoint);
  c.remote.path = t.get_string("remote.path", c.remote.path);
  c.remote.model = t.get_string("remote.model", c.remote.model);
  c.remote.api_key_env = t.get_string("remote.api_key_env", c.remote.api_key_env);
  c.remote.max_retries = geti(t, "remote.max_retries", c.remote.max_retries);
  c.remote.timeout_sec = t.get_double("remote.timeout_sec", c.remote.timeout_sec);
  c.remote.max_tokens = geti(t, "remote.max_tokens", c.remote.max_tokens);

  c.toy.num_positions = geti(t, "toy.num_positions", c.toy.num_positions);
  c.toy.num_actions = geti(t, "toy.num_actions", c.toy.num_actions);
  c.toy.optimal_offset = geti(t, "toy.optimal_offset", c.toy.optimal_offset);
  c.toy.slip = t.get_double("toy.slip", c.toy.slip);
  c.toy.max_episode_steps = geti(t, "toy.max_episode_steps", c.toy.max_episode_steps);
  c.toy.discount = t.get_double("toy.discount", c.toy.discount);

  c.vitals.num_devices = geti(t, "vitals.num_devices", c.vitals.num_devices);
  c.vitals.residency = geti(t, "vitals.residency", c.vitals.residency);
  c.vitals.max_episode_steps = geti(t, "vitals.max_episode_steps", c.vitals.max_episode_steps);
  c.vitals.discount = t.get_double("vitals.discount", c.vitals.discount);
  c.vitals.intervention_success =
      t.get_double("vitals.intervention_success", c.vitals.intervention_success);
  c.vitals.inward_offset_frac =
      t.get_double("vitals.inward_offset_frac", c.vitals.inward_offset_frac);
  c.vitals.removal_penalty = t.get_double("vitals.removal_penalty", c.vitals.removal_penalty);

  c.heat.season_length = geti(t, "heat.season_length", c.heat.season_length);
  c.heat.budget = geti(t, "heat.budget", c.heat.budget);
  c.heat.history_window = geti(t, "heat.history_window", c.heat.history_window);
  c.heat.alert_effect = t.get_double("heat.alert_effect", c.heat.alert_effect);
  c.heat.streak_decay = t.get_double("heat.streak_decay", c.heat.streak_decay);
  c.heat.overspend_penalty = t.get_double("heat.overspend_penalty", c.heat.overspend_penalty);
  c.heat.max_episode_steps = geti(t, "heat.max_episode_steps", c.heat.max_episode_steps);
  c.heat.discount = t.get_double("heat.discount", c.heat.discount);
  c.heat.weather_mode = t.get_string("heat.weather_mode", c.heat.weather_mode);
  c.heat.weather_base = t.get_double("heat.weather_base", c.heat.weather_base);
  c.heat.weather_amp = t.get_double("heat.weather_amp", c.heat.weather_amp);
  c.heat.weather_period = t.get_double("heat.weather_period", c.heat.weather_period);
  c.heat.weather_phase = t.get_double("heat.weather_phase", c.heat.weather_phase);
  c.heat.weather_ar = t.get_double("heat.weather_ar", c.heat.weather_ar);
  c.heat.weather_noise = t.get_double("heat.weather_noise", c.heat.weather_noise);
  c.heat.weather_csv = t.get_string("heat.weather_csv", c.heat.weather_csv);
  c.heat.weather_column = t.get_string("heat.weather_column", c.heat.weather_column);

  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ConfigError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return run_config_from_toml(toml::parse(ss.str()), ss.str());
}

}  // namespace rbrl
