#pragma once

// Run configuration: one TOML file selects the environment, the agent
// variant, the backend, seeds, and every module's knobs. Unspecified keys
// keep their C++ defaults, so configs stay short.

#include "rbrl/agent.hpp"
#include "rbrl/heat_env.hpp"
#include "rbrl/ppo.hpp"
#include "rbrl/remote.hpp"
#include "rbrl/scripted_backend.hpp"
#include "rbrl/toml.hpp"
#include "rbrl/toy_env.hpp"
#include "rbrl/vitals_env.hpp"

#include <string>
#include <vector>

namespace rbrl {

struct RunConfig {
  std::string name = "run";
  std::string env_id = "toy";        // toy | vitals | heat
  std::string variant = "rbrl";      // agent variants plus "ppo"
  std::string backend = "scripted";  // scripted | remote
  std::vector<uint64_t> seeds = {1};
  std::string out_dir = "runs";

  AgentConfig agent;  // variant field is overwritten from `variant` above
  GatewayConfig gateway;
  EmbeddingConfig embedding;
  NetConfig net;
  SacConfig sac;
  PpoConfig ppo;
  ScriptedOptions scripted;
  RemoteLlmConfig remote;

  ToyConfig toy;
  VitalsConfig vitals;
  HeatConfig heat;

  std::string raw_toml;  // original text, copied into run directories

  void validate() const;
  EnvFactory env_factory() const;
  BackendFactory backend_factory() const;
};

RunConfig run_config_from_toml(const toml::Table& t, std::string raw_text = "");
RunConfig load_run_config(const std::string& path);

}  // namespace rbrl
