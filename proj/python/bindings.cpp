// Python bindings for the rule-bottleneck RL core: environments, the
// language gateway with its scripted backend, embeddings, the SAC trainer,
// the full agent loop, run configuration, replay verification, and the
// small numeric utilities.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rbrl/agent.hpp"
#include "rbrl/checkpoint.hpp"
#include "rbrl/common.hpp"
#include "rbrl/embedding.hpp"
#include "rbrl/env.hpp"
#include "rbrl/ewma.hpp"
#include "rbrl/gateway.hpp"
#include "rbrl/heat_env.hpp"
#include "rbrl/nets.hpp"
#include "rbrl/replay.hpp"
#include "rbrl/run_config.hpp"
#include "rbrl/sac.hpp"
#include "rbrl/scripted_backend.hpp"
#include "rbrl/text.hpp"
#include "rbrl/toml.hpp"
#include "rbrl/toy_env.hpp"
#include "rbrl/vitals_env.hpp"

#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace rbrl;

namespace {

// Mirrors the coupling the TOML loader applies: rule embeddings feed the
// attention networks, so the net's embedding width follows the provider's.
RunConfig synced(RunConfig cfg) {
  cfg.net.embed_dim = cfg.embedding.dim;
  return cfg;
}

Mat embed_rule_rows(Embedder& e, const std::vector<RuleText>& rules) {
  Mat m(static_cast<int>(rules.size()), e.dim());
  for (size_t i = 0; i < rules.size(); ++i)
    m.row(static_cast<int>(i)) = e.embed(rule_display(rules[i])).transpose();
  return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Rule-bottleneck reinforcement learning core";

  // --- numerics & utilities -------------------------------------------------
  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<TransportError>(m, "TransportError");

  py::class_<Rng>(m, "Rng")
      .def(py::init<uint64_t>(), py::arg("seed") = 0)
      .def("seed", &Rng::seed)
      .def("uniform", py::overload_cast<>(&Rng::uniform))
      .def("uniform", py::overload_cast<double, double>(&Rng::uniform))
      .def("uniform_int", &Rng::uniform_int, py::arg("lo"), py::arg("hi"))
      .def("normal", &Rng::normal, py::arg("mean") = 0.0, py::arg("sd") = 1.0);

  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("a"), py::arg("b") = 0,
        py::arg("c") = 0, "Derives an independent seed stream from (seed, ids).");
  m.def("sha256_hex", &sha256_hex, py::arg("text"));

  py::class_<Ewma>(m, "Ewma")
      .def(py::init<double>(), py::arg("half_life"))
      .def("update", &Ewma::update)
      .def("value", &Ewma::value)
      .def("alpha", &Ewma::alpha)
      .def("empty", &Ewma::empty);
  m.def("ewma_smooth", &ewma_smooth, py::arg("xs"), py::arg("half_life"));

  // --- environments ----------------------------------------------------------
  py::class_<EnvSpec>(m, "EnvSpec")
      .def_readonly("id", &EnvSpec::id)
      .def_readonly("state_dim", &EnvSpec::state_dim)
      .def_readonly("num_actions", &EnvSpec::num_actions)
      .def_readonly("max_episode_steps", &EnvSpec::max_episode_steps)
      .def_readonly("discount", &EnvSpec::discount);

  py::class_<NumericState>(m, "NumericState")
      .def(py::init<>())
      .def_readwrite("values", &NumericState::values)
      .def_readwrite("step_index", &NumericState::step_index);

  py::class_<BudgetStatus>(m, "BudgetStatus")
      .def_readonly("spent", &BudgetStatus::spent)
      .def_readonly("limit", &BudgetStatus::limit)
      .def_readonly("text", &BudgetStatus::text);

  py::class_<StepOutcome>(m, "StepOutcome")
      .def_readonly("next_state", &StepOutcome::next_state)
      .def_readonly("reward", &StepOutcome::reward)
      .def_readonly("terminated", &StepOutcome::terminated)
      .def_readonly("truncated", &StepOutcome::truncated)
      .def_readonly("note", &StepOutcome::note)
      .def("done", &StepOutcome::done);

  py::class_<RuleText>(m, "RuleText")
      .def(py::init<>())
      .def(py::init([](std::string b, std::string s, std::string r) {
             RuleText t;
             t.background = std::move(b);
             t.rule_statement = std::move(s);
             t.state_relevance = std::move(r);
             return t;
           }),
           py::arg("background"), py::arg("rule_statement"), py::arg("state_relevance"))
      .def_readwrite("background", &RuleText::background)
      .def_readwrite("rule_statement", &RuleText::rule_statement)
      .def_readwrite("state_relevance", &RuleText::state_relevance)
      .def("__repr__", [](const RuleText& r) { return rule_json(r); });
  m.def("rule_display", &rule_display, py::arg("rule"));
  m.def("rule_json", &rule_json, py::arg("rule"));

  py::class_<Environment, std::shared_ptr<Environment>>(m, "Environment")
      .def_property_readonly("spec", &Environment::spec,
                             py::return_value_policy::reference_internal)
      .def("reset", &Environment::reset, py::arg("seed"))
      .def("step", &Environment::step, py::arg("action"))
      .def("state", &Environment::state, py::return_value_policy::reference_internal)
      .def("budget", &Environment::budget)
      .def("task_text", &Environment::task_text)
      .def("action_space_text", &Environment::action_space_text)
      .def("action_format_text", &Environment::action_format_text)
      .def("action_text", &Environment::action_text, py::arg("action"))
      .def("describe_state", &Environment::describe_state, py::arg("state"))
      .def("parse_keys", &Environment::parse_keys)
      .def("example_rules", &Environment::example_rules)
      .def("oracle_action", &Environment::oracle_action, py::arg("state"))
      .def("parse_action", &Environment::parse_action, py::arg("text"));

  py::class_<ToyConfig>(m, "ToyConfig")
      .def(py::init<>())
      .def_readwrite("num_positions", &ToyConfig::num_positions)
      .def_readwrite("num_actions", &ToyConfig::num_actions)
      .def_readwrite("optimal_offset", &ToyConfig::optimal_offset)
      .def_readwrite("slip", &ToyConfig::slip)
      .def_readwrite("max_episode_steps", &ToyConfig::max_episode_steps)
      .def_readwrite("discount", &ToyConfig::discount);
  py::class_<ToyEnv, Environment, std::shared_ptr<ToyEnv>>(m, "ToyEnv")
      .def(py::init<const ToyConfig&>(), py::arg("config") = ToyConfig{})
      .def("transition_pmf", &ToyEnv::transition_pmf, py::arg("position"), py::arg("action"))
      .def("reward_for", &ToyEnv::reward_for, py::arg("position"), py::arg("action"))
      .def("position_of", &ToyEnv::position_of, py::arg("state"));

  py::class_<VitalsConfig>(m, "VitalsConfig")
      .def(py::init<>())
      .def_readwrite("num_devices", &VitalsConfig::num_devices)
      .def_readwrite("residency", &VitalsConfig::residency)
      .def_readwrite("intervention_success", &VitalsConfig::intervention_success)
      .def_readwrite("removal_penalty", &VitalsConfig::removal_penalty);
  py::class_<Patient>(m, "Patient")
      .def_readonly("id", &Patient::id)
      .def_readonly("time_worn", &Patient::time_worn)
      .def_readonly("obs_count", &Patient::obs_count)
      .def_readonly("last", &Patient::last)
      .def_readonly("mean", &Patient::mean);
  py::class_<VitalsEnv, Environment, std::shared_ptr<VitalsEnv>>(m, "VitalsEnv")
      .def(py::init<const VitalsConfig&>(), py::arg("config") = VitalsConfig{})
      .def("slot", &VitalsEnv::slot, py::arg("device"),
           py::return_value_policy::reference_internal)
      .def("warmed_up", &VitalsEnv::warmed_up);

  py::class_<HeatConfig>(m, "HeatConfig")
      .def(py::init<>())
      .def_readwrite("season_length", &HeatConfig::season_length)
      .def_readwrite("budget", &HeatConfig::budget)
      .def_readwrite("history_window", &HeatConfig::history_window)
      .def_readwrite("max_episode_steps", &HeatConfig::max_episode_steps);
  py::class_<HeatAlertsEnv, Environment, std::shared_ptr<HeatAlertsEnv>>(m, "HeatAlertsEnv")
      .def(py::init<const HeatConfig&>(), py::arg("config") = HeatConfig{})
      .def("remaining_budget", &HeatAlertsEnv::remaining_budget)
      .def("day", &HeatAlertsEnv::day)
      .def("current_heat", &HeatAlertsEnv::current_heat);

  // --- language gateway -------------------------------------------------------
  py::class_<LlmBackend, std::shared_ptr<LlmBackend>>(m, "LlmBackend")
      .def("complete",
           [](LlmBackend& b, const std::string& prompt, double temperature) {
             return b.complete({prompt, temperature});
           },
           py::arg("prompt"), py::arg("temperature") = 0.7)
      .def("seed_episode", &LlmBackend::seed_episode, py::arg("seed"))
      .def("name", &LlmBackend::name);

  py::class_<ScriptedOptions>(m, "ScriptedOptions")
      .def(py::init<>())
      .def_readwrite("toy_rules", &ScriptedOptions::toy_rules)
      .def_readwrite("toy_offset_hint", &ScriptedOptions::toy_offset_hint)
      .def_readwrite("thought_accuracy", &ScriptedOptions::thought_accuracy);
  py::class_<ScriptedBackend, LlmBackend, std::shared_ptr<ScriptedBackend>>(m,
                                                                            "ScriptedBackend")
      .def(py::init<ScriptedOptions, uint64_t>(), py::arg("options") = ScriptedOptions{},
           py::arg("seed") = 0);

  py::class_<GatewayConfig>(m, "GatewayConfig")
      .def(py::init<>())
      .def_readwrite("num_rules", &GatewayConfig::num_rules)
      .def_readwrite("max_retries", &GatewayConfig::max_retries)
      .def_readwrite("temperature", &GatewayConfig::temperature)
      .def_readwrite("prompts_dir", &GatewayConfig::prompts_dir);

  py::class_<GatewayStats>(m, "GatewayStats")
      .def_readonly("action_fallbacks", &GatewayStats::action_fallbacks)
      .def_readonly("padded_rule_sets", &GatewayStats::padded_rule_sets)
      .def_readonly("judge_unparsed", &GatewayStats::judge_unparsed)
      .def_readonly("select_fallbacks", &GatewayStats::select_fallbacks);

  py::class_<PromptBundle>(m, "PromptBundle")
      .def_readonly("task", &PromptBundle::task)
      .def_readonly("state_text", &PromptBundle::state_text)
      .def_readonly("actions", &PromptBundle::actions)
      .def_readonly("constraints", &PromptBundle::constraints);

  py::class_<RuleSet>(m, "RuleSet")
      .def_readonly("rules", &RuleSet::rules)
      .def_readonly("padded", &RuleSet::padded);

  py::class_<JudgeScores>(m, "JudgeScores")
      .def_readonly("er1", &JudgeScores::er1)
      .def_readonly("er2", &JudgeScores::er2)
      .def_readonly("er3", &JudgeScores::er3)
      .def_readonly("unparsed", &JudgeScores::unparsed)
      .def("rule_reward", &JudgeScores::rule_reward);

  py::enum_<CompareVerdict>(m, "CompareVerdict")
      .value("A", CompareVerdict::kA)
      .value("B", CompareVerdict::kB)
      .value("TIE", CompareVerdict::kTie);

  py::class_<Gateway>(m, "Gateway")
      .def(py::init([](const GatewayConfig& cfg, std::shared_ptr<LlmBackend> backend) {
             return std::make_unique<Gateway>(cfg, std::move(backend));
           }),
           py::arg("config"), py::arg("backend"))
      .def("bundle",
           [](Gateway& g, const Environment& env) { return g.bundle(env); },
           py::arg("env"))
      .def("bundle",
           [](Gateway& g, const Environment& env, const NumericState& s) {
             return g.bundle(env, s);
           },
           py::arg("env"), py::arg("state"))
      .def("thought", &Gateway::thought, py::arg("bundle"))
      .def("rules", &Gateway::rules, py::arg("bundle"), py::arg("thought"), py::arg("env"))
      .def("candidates", &Gateway::candidates, py::arg("bundle"), py::arg("env"))
      .def("action",
           [](Gateway& g, const PromptBundle& b, const std::string& thought,
              const RuleText& rule, const Environment& env, Rng& rng) {
             bool fallback = false;
             const int a = g.action(b, thought, rule, env, rng, &fallback);
             return py::make_tuple(a, fallback);
           },
           py::arg("bundle"), py::arg("thought"), py::arg("rule"), py::arg("env"),
           py::arg("fallback_rng"), "Returns (action, fallback_used).")
      .def("action_from_thought",
           [](Gateway& g, const PromptBundle& b, const std::string& thought,
              const Environment& env, Rng& rng) {
             bool fallback = false;
             const int a = g.action_from_thought(b, thought, env, rng, &fallback);
             return py::make_tuple(a, fallback);
           },
           py::arg("bundle"), py::arg("thought"), py::arg("env"), py::arg("fallback_rng"),
           "Returns (action, fallback_used).")
      .def("select_rule",
           [](Gateway& g, const PromptBundle& b, const std::string& thought, const RuleSet& rs,
              Rng& rng) {
             bool fallback = false;
             const int k = g.select_rule(b, thought, rs, rng, &fallback);
             return py::make_tuple(k, fallback);
           },
           py::arg("bundle"), py::arg("thought"), py::arg("rule_set"), py::arg("fallback_rng"),
           "Returns (index, fallback_used).")
      .def("explanation", &Gateway::explanation, py::arg("bundle"), py::arg("thought"),
           py::arg("rule"), py::arg("action_id"), py::arg("env"))
      .def("judge", &Gateway::judge, py::arg("bundle"), py::arg("rule"), py::arg("action_id"),
           py::arg("env"))
      .def("compare", &Gateway::compare, py::arg("task"), py::arg("state_text"), py::arg("a"),
           py::arg("b"))
      .def("hallucination", &Gateway::hallucination, py::arg("task"), py::arg("state_text"),
           py::arg("explanation"))
      .def("render", &Gateway::render, py::arg("template_name"), py::arg("vars"))
      .def("template_text", &Gateway::template_text, py::arg("name"))
      .def("templates_hash", &Gateway::templates_hash)
      .def("stats", &Gateway::stats);

  // --- embeddings --------------------------------------------------------------
  py::class_<EmbeddingConfig>(m, "EmbeddingConfig")
      .def(py::init<>())
      .def_readwrite("provider", &EmbeddingConfig::provider)
      .def_readwrite("dim", &EmbeddingConfig::dim)
      .def_readwrite("cache_capacity", &EmbeddingConfig::cache_capacity)
      .def_readwrite("endpoint", &EmbeddingConfig::endpoint)
      .def_readwrite("model", &EmbeddingConfig::model)
      .def_readwrite("api_key_env", &EmbeddingConfig::api_key_env);

  py::class_<Embedder, std::shared_ptr<Embedder>>(m, "Embedder")
      .def("embed", &Embedder::embed, py::arg("text"))
      .def("dim", &Embedder::dim)
      .def("embed_rules",
           [](Embedder& e, const std::vector<RuleText>& rules) {
             return embed_rule_rows(e, rules);
           },
           py::arg("rules"), "One embedding row per rule, in display form.");
  m.def(
      "make_embedder",
      [](const EmbeddingConfig& cfg) {
        return std::shared_ptr<Embedder>(make_embedder(cfg));
      },
      py::arg("config"));

  // --- SAC ----------------------------------------------------------------------
  py::class_<NetConfig>(m, "NetConfig")
      .def(py::init<>())
      .def_readwrite("state_dim", &NetConfig::state_dim)
      .def_readwrite("embed_dim", &NetConfig::embed_dim)
      .def_readwrite("hidden_dim", &NetConfig::hidden_dim)
      .def_readwrite("n_heads", &NetConfig::n_heads)
      .def_readwrite("cross_layers", &NetConfig::cross_layers)
      .def_readwrite("self_layers", &NetConfig::self_layers)
      .def_readwrite("dropout", &NetConfig::dropout);

  py::class_<SacConfig>(m, "SacConfig")
      .def(py::init<>())
      .def_readwrite("gamma", &SacConfig::gamma)
      .def_readwrite("tau", &SacConfig::tau)
      .def_readwrite("batch_size", &SacConfig::batch_size)
      .def_readwrite("buffer_size", &SacConfig::buffer_size)
      .def_readwrite("learning_starts", &SacConfig::learning_starts)
      .def_readwrite("policy_lr", &SacConfig::policy_lr)
      .def_readwrite("q_lr", &SacConfig::q_lr)
      .def_readwrite("alpha_lr", &SacConfig::alpha_lr)
      .def_readwrite("updates_per_step", &SacConfig::updates_per_step)
      .def_readwrite("target_network_frequency", &SacConfig::target_network_frequency)
      .def_readwrite("alpha", &SacConfig::alpha)
      .def_readwrite("autotune", &SacConfig::autotune)
      .def_readwrite("target_entropy_scale", &SacConfig::target_entropy_scale);

  py::class_<Transition>(m, "Transition")
      .def(py::init<>())
      .def_readwrite("state", &Transition::state)
      .def_readwrite("rules", &Transition::rules)
      .def_readwrite("chosen", &Transition::chosen)
      .def_readwrite("reward", &Transition::reward)
      .def_readwrite("done", &Transition::done)
      .def_readwrite("next_state", &Transition::next_state)
      .def_readwrite("next_rules", &Transition::next_rules);

  py::class_<ReplayBuffer>(m, "ReplayBuffer")
      .def(py::init<int>(), py::arg("capacity"))
      .def("add", &ReplayBuffer::add, py::arg("transition"))
      .def("size", &ReplayBuffer::size)
      .def("capacity", &ReplayBuffer::capacity)
      .def("at", &ReplayBuffer::at, py::arg("i"), py::return_value_policy::reference_internal);

  py::class_<TrainMetrics>(m, "TrainMetrics")
      .def_readonly("critic_loss", &TrainMetrics::critic_loss)
      .def_readonly("actor_loss", &TrainMetrics::actor_loss)
      .def_readonly("alpha_loss", &TrainMetrics::alpha_loss)
      .def_readonly("entropy", &TrainMetrics::entropy)
      .def_readonly("alpha", &TrainMetrics::alpha)
      .def_readonly("updates", &TrainMetrics::updates);

  py::class_<SacTrainer>(m, "SacTrainer")
      .def(py::init<const NetConfig&, const SacConfig&, uint64_t>(), py::arg("net_config"),
           py::arg("sac_config"), py::arg("seed"))
      .def("policy_probs", &SacTrainer::policy_probs, py::arg("state"), py::arg("rules"))
      .def("act_sample", &SacTrainer::act_sample, py::arg("state"), py::arg("rules"),
           py::arg("rng"))
      .def("act_greedy", &SacTrainer::act_greedy, py::arg("state"), py::arg("rules"))
      .def("train_step", &SacTrainer::train_step, py::arg("buffer"), py::arg("rng"))
      .def("sync_targets", &SacTrainer::sync_targets, py::arg("tau"))
      .def("alpha", &SacTrainer::alpha)
      .def("target_entropy", &SacTrainer::target_entropy)
      .def("steps", &SacTrainer::steps);

  m.def("save_trainer", [](SacTrainer& t, const std::string& path) {
    Checkpoint c;
    capture_trainer("sac.", t, c);
    c.save(path);
  });
  m.def("load_trainer", [](SacTrainer& t, const std::string& path) {
    restore_trainer("sac.", t, Checkpoint::load(path));
  });

  // --- agent & runs ----------------------------------------------------------------
  py::enum_<Variant>(m, "Variant")
      .value("RBRL", Variant::kRbrl)
      .value("TBRL", Variant::kTbrl)
      .value("RULES_ONLY", Variant::kRulesOnly)
      .value("COT", Variant::kCot)
      .value("RANDOM_RULE", Variant::kRandomRule);
  m.def("variant_from_string", &variant_from_string);
  m.def("variant_to_string", &variant_to_string);

  py::class_<AgentConfig>(m, "AgentConfig")
      .def(py::init<>())
      .def_readwrite("variant", &AgentConfig::variant)
      .def_readwrite("num_envs", &AgentConfig::num_envs)
      .def_readwrite("rule_reward_coef", &AgentConfig::rule_reward_coef)
      .def_readwrite("total_env_steps", &AgentConfig::total_env_steps)
      .def_readwrite("seed", &AgentConfig::seed)
      .def_readwrite("log_path", &AgentConfig::log_path)
      .def_readwrite("metrics_path", &AgentConfig::metrics_path)
      .def_readwrite("explain_every", &AgentConfig::explain_every);

  py::class_<StepRecord>(m, "StepRecord")
      .def_readonly("env_id", &StepRecord::env_id)
      .def_readonly("global_step", &StepRecord::global_step)
      .def_readonly("episode", &StepRecord::episode)
      .def_readonly("step_in_episode", &StepRecord::step_in_episode)
      .def_readonly("state_text", &StepRecord::state_text)
      .def_readonly("thought", &StepRecord::thought)
      .def_readonly("rules", &StepRecord::rules)
      .def_readonly("chosen", &StepRecord::chosen)
      .def_readonly("action", &StepRecord::action)
      .def_readonly("action_fallback", &StepRecord::action_fallback)
      .def_readonly("judge", &StepRecord::judge)
      .def_readonly("rule_reward", &StepRecord::rule_reward)
      .def_readonly("env_reward", &StepRecord::env_reward)
      .def_readonly("combined_reward", &StepRecord::combined_reward)
      .def_readonly("terminated", &StepRecord::terminated)
      .def_readonly("truncated", &StepRecord::truncated)
      .def_readonly("explanation", &StepRecord::explanation);

  py::class_<EvalResult>(m, "EvalResult")
      .def_readonly("mean_return", &EvalResult::mean_return)
      .def_readonly("se_return", &EvalResult::se_return)
      .def_readonly("mean_env_return", &EvalResult::mean_env_return)
      .def_readonly("mean_rule_reward", &EvalResult::mean_rule_reward)
      .def_readonly("mean_er1", &EvalResult::mean_er1)
      .def_readonly("mean_er2", &EvalResult::mean_er2)
      .def_readonly("mean_er3", &EvalResult::mean_er3)
      .def_readonly("optimal_rate", &EvalResult::optimal_rate)
      .def_readonly("steps", &EvalResult::steps)
      .def_readonly("episodes", &EvalResult::episodes)
      .def_readonly("records", &EvalResult::records);

  py::class_<Agent>(m, "Agent")
      .def("train", &Agent::train, py::call_guard<py::gil_scoped_release>())
      .def("evaluate", &Agent::evaluate, py::arg("episodes"), py::arg("eval_seed"),
           py::arg("greedy") = true, py::arg("with_explanations") = false,
           py::call_guard<py::gil_scoped_release>())
      .def("global_steps", &Agent::global_steps)
      .def("buffer", &Agent::buffer, py::return_value_policy::reference_internal)
      .def("gateway_stats", &Agent::combined_gateway_stats)
      .def_property_readonly("config", &Agent::config,
                             py::return_value_policy::reference_internal);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("name", &RunConfig::name)
      .def_readwrite("env_id", &RunConfig::env_id)
      .def_readwrite("variant", &RunConfig::variant)
      .def_readwrite("backend", &RunConfig::backend)
      .def_readwrite("seeds", &RunConfig::seeds)
      .def_readwrite("out_dir", &RunConfig::out_dir)
      .def_readwrite("agent", &RunConfig::agent)
      .def_readwrite("gateway", &RunConfig::gateway)
      .def_readwrite("embedding", &RunConfig::embedding)
      .def_readwrite("net", &RunConfig::net)
      .def_readwrite("sac", &RunConfig::sac)
      .def_readwrite("scripted", &RunConfig::scripted)
      .def_readwrite("toy", &RunConfig::toy)
      .def_readwrite("vitals", &RunConfig::vitals)
      .def_readwrite("heat", &RunConfig::heat)
      .def("validate", &RunConfig::validate);

  m.def("load_run_config", &load_run_config, py::arg("path"),
        "Parses a TOML run configuration file.");
  m.def(
      "run_config_from_toml_text",
      [](const std::string& text) { return run_config_from_toml(toml::parse(text), text); },
      py::arg("text"));

  m.def(
      "make_env",
      [](const RunConfig& cfg) {
        return std::shared_ptr<Environment>(cfg.env_factory()());
      },
      py::arg("config"), "Builds the environment the configuration selects.");
  m.def(
      "make_backend", [](const RunConfig& cfg) { return cfg.backend_factory()(); },
      py::arg("config"), "Builds the language backend the configuration selects.");
  m.def(
      "make_agent",
      [](const RunConfig& cfg, Variant variant, uint64_t seed) {
        RunConfig c = synced(cfg);
        c.agent.variant = variant;
        c.agent.seed = seed;
        c.agent.validate();
        return std::make_unique<Agent>(c.agent, c.gateway, c.embedding, c.net, c.sac,
                                       c.env_factory(), c.backend_factory());
      },
      py::arg("config"), py::arg("variant") = Variant::kRbrl, py::arg("seed") = 1,
      "Builds a full agent (gateway, embedder, trainer, workers) from a run "
      "configuration. The agent's variant and seed are taken from the "
      "arguments; log and metrics paths from config.agent.");

  py::class_<ReplayResult>(m, "ReplayResult")
      .def_readonly("workers", &ReplayResult::workers)
      .def_readonly("steps", &ReplayResult::steps)
      .def_readonly("episodes", &ReplayResult::episodes)
      .def_readonly("generations", &ReplayResult::generations)
      .def_readonly("mismatches", &ReplayResult::mismatches)
      .def("ok", &ReplayResult::ok);
  m.def(
      "replay_log",
      [](const RunConfig& cfg, const std::string& log_path) {
        std::ostringstream err;
        ReplayResult r;
        {
          py::gil_scoped_release release;
          r = replay_log(cfg, log_path, &err);
        }
        return py::make_tuple(r, err.str());
      },
      py::arg("config"), py::arg("log_path"),
      "Re-runs every generation in a training log against the configured "
      "scripted backend. Returns (result, mismatch_report).");
}
