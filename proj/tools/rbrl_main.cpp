// Command-line front end: training runs (learned variants, scripted
// baselines, and the numeric PPO reference), deterministic evaluation,
// metric smoothing and plotting, pairwise explanation comparison, blinded
// survey export, and bit-exact log replay.

#include "CLI11.hpp"
#include "json.hpp"

#include "rbrl/agent.hpp"
#include "rbrl/checkpoint.hpp"
#include "rbrl/csv.hpp"
#include "rbrl/ewma.hpp"
#include "rbrl/ppo.hpp"
#include "rbrl/replay.hpp"
#include "rbrl/run_config.hpp"
#include "rbrl/svg_plot.hpp"
#include "rbrl/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace rbrl;

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<json> out;
  std::string line;
  long long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

json rule_to_json(const RuleText& r) {
  return json{{"background", r.background},
              {"rule_statement", r.rule_statement},
              {"state_relevance", r.state_relevance}};
}

json eval_to_json(const EvalResult& r) {
  return json{{"mean_return", r.mean_return},
              {"se_return", r.se_return},
              {"mean_env_return", r.mean_env_return},
              {"mean_rule_reward", r.mean_rule_reward},
              {"mean_er1", r.mean_er1},
              {"mean_er2", r.mean_er2},
              {"mean_er3", r.mean_er3},
              {"optimal_rate", r.optimal_rate},
              {"steps", r.steps},
              {"episodes", r.episodes}};
}

// Applies the shared command-line overrides to a loaded config and remembers
// them for the run manifest.
struct Overrides {
  std::string variant, backend, out_dir, name;
  std::vector<uint64_t> seeds;
  long long steps = -1;
  int explain_every = -1;

  json apply(RunConfig& cfg) const {
    json applied = json::object();
    if (!variant.empty()) { cfg.variant = variant; applied["variant"] = variant; }
    if (!backend.empty()) { cfg.backend = backend; applied["backend"] = backend; }
    if (!out_dir.empty()) { cfg.out_dir = out_dir; applied["out_dir"] = out_dir; }
    if (!name.empty()) { cfg.name = name; applied["name"] = name; }
    if (!seeds.empty()) { cfg.seeds = seeds; applied["seeds"] = seeds; }
    if (steps >= 0) {
      cfg.agent.total_env_steps = steps;
      cfg.ppo.total_timesteps = steps;
      applied["steps"] = steps;
    }
    if (explain_every >= 0) {
      cfg.agent.explain_every = explain_every;
      applied["explain_every"] = explain_every;
    }
    if (cfg.variant != "ppo") cfg.agent.variant = variant_from_string(cfg.variant);
    cfg.validate();
    return applied;
  }
};

std::string run_dir_for(const RunConfig& cfg, uint64_t seed) {
  return (fs::path(cfg.out_dir) /
          (cfg.name + "-" + cfg.variant + "-seed" + std::to_string(seed)))
      .string();
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int run_train(const std::string& config_path, const Overrides& ov,
              const std::string& resume_path) {
  RunConfig cfg = load_run_config(config_path);
  const json applied = ov.apply(cfg);
  if (!resume_path.empty() && cfg.seeds.size() != 1)
    throw ConfigError("--resume requires exactly one seed");

  for (uint64_t seed : cfg.seeds) {
    const fs::path dir = run_dir_for(cfg, seed);
    fs::create_directories(dir);
    if (!cfg.raw_toml.empty()) write_text_file((dir / "config.toml").string(), cfg.raw_toml);

    json manifest{{"name", cfg.name},       {"env", cfg.env_id},
                  {"variant", cfg.variant}, {"backend", cfg.backend},
                  {"seed", seed},           {"overrides", applied}};

    if (cfg.variant == "ppo") {
      const EnvFactory make_env = cfg.env_factory();
      const EnvSpec spec = make_env()->spec();
      PpoTrainer trainer(spec.state_dim, spec.num_actions, cfg.ppo, seed);
      if (!resume_path.empty())
        restore_ppo("ppo.", trainer, Checkpoint::load(resume_path));
      manifest["total_timesteps"] = cfg.ppo.total_timesteps;
      manifest["num_envs"] = cfg.ppo.num_envs;
      write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");

      const PpoRunStats stats = trainer.train(make_env, (dir / "metrics.csv").string());
      Checkpoint ckpt;
      capture_ppo("ppo.", trainer, ckpt);
      ckpt.save((dir / "checkpoint.bin").string());
      std::cout << "[train] seed=" << seed << " dir=" << dir.string()
                << " steps=" << stats.steps << " updates=" << stats.updates
                << " episodes=" << stats.episodes
                << " recent_return=" << stats.mean_recent_return << "\n";
      continue;
    }

    AgentConfig ac = cfg.agent;
    ac.seed = seed;
    ac.log_path = (dir / "episodes.jsonl").string();
    ac.metrics_path = (dir / "metrics.csv").string();
    Agent agent(ac, cfg.gateway, cfg.embedding, cfg.net, cfg.sac, cfg.env_factory(),
                cfg.backend_factory());
    manifest["total_env_steps"] = ac.total_env_steps;
    manifest["num_envs"] = ac.num_envs;
    manifest["rule_reward_coef"] = ac.rule_reward_coef;
    manifest["embed_dim"] = cfg.embedding.dim;
    manifest["templates_sha256"] = agent.gateway(0).templates_hash();
    write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");

    if (!resume_path.empty()) {
      if (!variant_trains(ac.variant))
        throw ConfigError("--resume needs a learned variant");
      restore_trainer("sac.", agent.trainer(), Checkpoint::load(resume_path));
    }
    agent.train();
    if (variant_trains(ac.variant)) {
      Checkpoint ckpt;
      capture_trainer("sac.", agent.trainer(), ckpt);
      ckpt.save((dir / "checkpoint.bin").string());
    }
    const GatewayStats gs = agent.combined_gateway_stats();
    std::cout << "[train] seed=" << seed << " dir=" << dir.string()
              << " steps=" << agent.global_steps()
              << " buffer=" << (variant_trains(ac.variant) ? agent.buffer().size() : 0)
              << " action_fallbacks=" << gs.action_fallbacks
              << " padded_rule_sets=" << gs.padded_rule_sets
              << " judge_unparsed=" << gs.judge_unparsed << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int run_eval(const std::string& config_path, const Overrides& ov,
             const std::string& checkpoint_path, int episodes, uint64_t seed, bool sample,
             bool explanations, const std::string& out_path,
             const std::string& records_path) {
  RunConfig cfg = load_run_config(config_path);
  ov.apply(cfg);

  json result;
  if (cfg.variant == "ppo") {
    const EnvFactory make_env = cfg.env_factory();
    const EnvSpec spec = make_env()->spec();
    PpoTrainer trainer(spec.state_dim, spec.num_actions, cfg.ppo,
                       cfg.seeds.empty() ? 1 : cfg.seeds[0]);
    if (!checkpoint_path.empty())
      restore_ppo("ppo.", trainer, Checkpoint::load(checkpoint_path));
    const PpoEvalOut out = trainer.evaluate(make_env, episodes, seed);
    result = json{{"variant", "ppo"},
                  {"mean_return", out.mean_return},
                  {"se_return", out.se_return},
                  {"steps", out.steps},
                  {"episodes", out.episodes}};
  } else {
    AgentConfig ac = cfg.agent;
    ac.seed = cfg.seeds.empty() ? 1 : cfg.seeds[0];
    ac.log_path.clear();
    ac.metrics_path.clear();
    Agent agent(ac, cfg.gateway, cfg.embedding, cfg.net, cfg.sac, cfg.env_factory(),
                cfg.backend_factory());
    if (!checkpoint_path.empty()) {
      if (!variant_trains(ac.variant))
        throw ConfigError("--checkpoint needs a learned variant");
      restore_trainer("sac.", agent.trainer(), Checkpoint::load(checkpoint_path));
    }
    const EvalResult res = agent.evaluate(episodes, seed, !sample, explanations);
    result = eval_to_json(res);
    result["variant"] = cfg.variant;

    if (!records_path.empty()) {
      std::ofstream rec(records_path, std::ios::binary);
      if (!rec) throw ConfigError("cannot write " + records_path);
      const EnvPtr env = cfg.env_factory()();
      json header{{"type", "header"},
                  {"variant", cfg.variant},
                  {"env", cfg.env_id},
                  {"backend", cfg.backend},
                  {"eval_seed", seed},
                  {"greedy", !sample},
                  {"task", env->task_text()}};
      rec << header.dump() << "\n";
      for (const StepRecord& s : res.records) {
        json j{{"type", "step"},
               {"env_id", s.env_id},
               {"episode", s.episode},
               {"step_in_episode", s.step_in_episode},
               {"state_sha256", sha256_hex(s.state_text)},
               {"state_text", s.state_text},
               {"thought", s.thought},
               {"chosen", s.chosen},
               {"action", s.action},
               {"action_fallback", s.action_fallback},
               {"er", {s.judge.er1, s.judge.er2, s.judge.er3}},
               {"rule_reward", s.rule_reward},
               {"env_reward", s.env_reward},
               {"combined_reward", s.combined_reward},
               {"terminated", s.terminated},
               {"truncated", s.truncated}};
        json jr = json::array();
        for (const auto& r : s.rules) jr.push_back(rule_to_json(r));
        j["rules"] = jr;
        if (!s.explanation.empty()) j["explanation"] = s.explanation;
        rec << j.dump() << "\n";
      }
    }
  }

  std::cout << result.dump(2) << "\n";
  if (!out_path.empty()) write_text_file(out_path, result.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// ewma
// ---------------------------------------------------------------------------

int run_ewma(const std::string& csv_path, const std::string& column, double half_life,
             const std::string& x_column, const std::string& out_path) {
  const CsvTable in = CsvTable::read(csv_path);
  const int yc = in.column_index(column);
  if (yc < 0) throw ConfigError("no column '" + column + "' in " + csv_path);
  const int xc = in.column_index(x_column);

  CsvTable out;
  out.columns = {x_column.empty() || xc < 0 ? "index" : x_column, "raw", "smoothed"};
  Ewma e(half_life);
  long long idx = 0;
  for (const auto& row : in.rows) {
    const double y = row[static_cast<size_t>(yc)];
    ++idx;
    if (!std::isfinite(y)) continue;  // rows that don't carry this metric
    const double x = xc >= 0 ? row[static_cast<size_t>(xc)] : static_cast<double>(idx - 1);
    out.append_row({x, y, e.update(y)});
  }
  if (out_path.empty())
    std::cout << out.to_string();
  else
    out.write(out_path);
  return 0;
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

int run_plot(const std::vector<std::string>& csv_paths, const std::string& column,
             const std::string& x_column, double half_life, const std::string& title,
             const std::string& out_path, bool per_seed) {
  std::vector<std::vector<double>> xs, ys;
  for (const auto& path : csv_paths) {
    const CsvTable t = CsvTable::read(path);
    const int yc = t.column_index(column);
    if (yc < 0) throw ConfigError("no column '" + column + "' in " + path);
    const int xc = t.column_index(x_column);
    std::vector<double> x, y;
    long long idx = 0;
    for (const auto& row : t.rows) {
      const double v = row[static_cast<size_t>(yc)];
      ++idx;
      if (!std::isfinite(v)) continue;
      x.push_back(xc >= 0 ? row[static_cast<size_t>(xc)] : static_cast<double>(idx - 1));
      y.push_back(v);
    }
    if (y.empty()) throw ConfigError("column '" + column + "' has no finite values in " + path);
    if (half_life > 0) y = ewma_smooth(y, half_life);
    xs.push_back(std::move(x));
    ys.push_back(std::move(y));
  }

  size_t n = ys[0].size();
  for (const auto& y : ys) n = std::min(n, y.size());
  for (size_t i = 0; i < ys.size(); ++i)
    if (ys[i].size() != n)
      std::cerr << "warning: " << csv_paths[i] << " truncated from " << ys[i].size() << " to "
                << n << " samples for alignment\n";

  SvgPlot plot;
  plot.title = title.empty() ? column : title;
  plot.xlabel = x_column;
  plot.ylabel = column;

  if (ys.size() == 1) {
    SvgSeries s;
    s.label = column;
    s.x.assign(xs[0].begin(), xs[0].begin() + static_cast<long>(n));
    s.y.assign(ys[0].begin(), ys[0].begin() + static_cast<long>(n));
    plot.series.push_back(std::move(s));
  } else {
    // Mean with a +/- standard-error band across runs, aligned by sample
    // index on the first file's x grid.
    const size_t m = ys.size();
    SvgSeries s;
    s.label = "mean of " + std::to_string(m) + " runs";
    for (size_t i = 0; i < n; ++i) {
      double mean = 0.0;
      for (const auto& y : ys) mean += y[i];
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (const auto& y : ys) var += (y[i] - mean) * (y[i] - mean);
      const double se = std::sqrt(var / static_cast<double>(m - 1)) /
                        std::sqrt(static_cast<double>(m));
      s.x.push_back(xs[0][i]);
      s.y.push_back(mean);
      s.band_lo.push_back(mean - se);
      s.band_hi.push_back(mean + se);
    }
    plot.series.push_back(std::move(s));
    if (per_seed) {
      for (size_t k = 0; k < m; ++k) {
        SvgSeries ind;
        ind.label = fs::path(csv_paths[k]).parent_path().filename().string();
        if (ind.label.empty()) ind.label = "run " + std::to_string(k + 1);
        ind.x.assign(xs[k].begin(), xs[k].begin() + static_cast<long>(n));
        ind.y.assign(ys[k].begin(), ys[k].begin() + static_cast<long>(n));
        plot.series.push_back(std::move(ind));
      }
    }
  }

  plot.write(out_path);
  std::cout << "[plot] wrote " << out_path << " (" << plot.series.size() << " series, " << n
            << " points)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// compare + export-survey (shared pairing)
// ---------------------------------------------------------------------------

struct ExplRecord {
  std::string sha;
  std::string state_text;
  std::string explanation;
};

std::vector<ExplRecord> explained_records(const std::string& path, long long* skipped) {
  std::vector<ExplRecord> out;
  for (const json& j : read_jsonl(path)) {
    if (j.value("type", "") != "step") continue;
    if (!j.contains("explanation") || j["explanation"].get<std::string>().empty()) {
      if (skipped) ++*skipped;
      continue;
    }
    ExplRecord r;
    r.state_text = j.value("state_text", "");
    r.sha = j.contains("state_sha256") ? j["state_sha256"].get<std::string>()
                                       : sha256_hex(r.state_text);
    r.explanation = j["explanation"].get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

// Pairs the k-th occurrence of each state hash in A with the k-th occurrence
// of the same hash in B, so swapping the two files mirrors the pairing.
std::vector<std::pair<size_t, size_t>> pair_by_state(const std::vector<ExplRecord>& a,
                                                     const std::vector<ExplRecord>& b) {
  std::map<std::string, std::vector<size_t>> b_by_sha;
  for (size_t i = 0; i < b.size(); ++i) b_by_sha[b[i].sha].push_back(i);
  std::map<std::string, size_t> next;
  std::vector<std::pair<size_t, size_t>> pairs;
  for (size_t i = 0; i < a.size(); ++i) {
    auto it = b_by_sha.find(a[i].sha);
    if (it == b_by_sha.end()) continue;
    size_t& k = next[a[i].sha];
    if (k >= it->second.size()) continue;
    pairs.emplace_back(i, it->second[k]);
    ++k;
  }
  return pairs;
}

int run_compare(const std::string& config_path, const std::string& log_a,
                const std::string& log_b, long long max_pairs, const std::string& out_path,
                const std::string& details_path) {
  RunConfig cfg = load_run_config(config_path);
  const EnvPtr env = cfg.env_factory()();
  const std::string task = env->task_text();
  Gateway gw(cfg.gateway, cfg.backend_factory()());

  long long skipped_a = 0, skipped_b = 0;
  const std::vector<ExplRecord> a = explained_records(log_a, &skipped_a);
  const std::vector<ExplRecord> b = explained_records(log_b, &skipped_b);
  auto pairs = pair_by_state(a, b);
  if (max_pairs > 0 && static_cast<long long>(pairs.size()) > max_pairs)
    pairs.resize(static_cast<size_t>(max_pairs));

  std::ofstream details;
  if (!details_path.empty()) {
    details.open(details_path, std::ios::binary);
    if (!details) throw ConfigError("cannot write " + details_path);
  }

  long long a_wins = 0, b_wins = 0, ties = 0, hall_a = 0, hall_b = 0;
  for (const auto& [ia, ib] : pairs) {
    const ExplRecord& ra = a[ia];
    const ExplRecord& rb = b[ib];
    const CompareVerdict v = gw.compare(task, ra.state_text, ra.explanation, rb.explanation);
    const bool ha = gw.hallucination(task, ra.state_text, ra.explanation);
    const bool hb = gw.hallucination(task, rb.state_text, rb.explanation);
    if (v == CompareVerdict::kA) ++a_wins;
    else if (v == CompareVerdict::kB) ++b_wins;
    else ++ties;
    hall_a += ha ? 1 : 0;
    hall_b += hb ? 1 : 0;
    if (details.is_open()) {
      json d{{"state_sha256", ra.sha},
             {"verdict", v == CompareVerdict::kA ? "a" : v == CompareVerdict::kB ? "b" : "tie"},
             {"hallucinated_a", ha},
             {"hallucinated_b", hb}};
      details << d.dump() << "\n";
    }
  }

  const double np = pairs.empty() ? 1.0 : static_cast<double>(pairs.size());
  json result{{"pairs", pairs.size()},
              {"a_wins", a_wins},
              {"b_wins", b_wins},
              {"ties", ties},
              {"pct_a", 100.0 * static_cast<double>(a_wins) / np},
              {"pct_b", 100.0 * static_cast<double>(b_wins) / np},
              {"pct_tie", 100.0 * static_cast<double>(ties) / np},
              {"hallucinated_a", hall_a},
              {"hallucinated_b", hall_b},
              {"unmatched_a", a.size() - pairs.size()},
              {"unmatched_b", b.size() - pairs.size()},
              {"skipped_no_explanation_a", skipped_a},
              {"skipped_no_explanation_b", skipped_b},
              {"log_a", log_a},
              {"log_b", log_b}};
  std::cout << result.dump(2) << "\n";
  if (!out_path.empty()) write_text_file(out_path, result.dump(2) + "\n");
  return 0;
}

int run_survey(const std::string& config_path, const std::string& log_a,
               const std::string& log_b, int n, uint64_t seed, const std::string& out_path,
               const std::string& key_path) {
  RunConfig cfg = load_run_config(config_path);
  const EnvPtr env = cfg.env_factory()();
  const std::string task = env->task_text();

  const std::vector<ExplRecord> a = explained_records(log_a, nullptr);
  const std::vector<ExplRecord> b = explained_records(log_b, nullptr);
  const auto pairs = pair_by_state(a, b);
  if (static_cast<int>(pairs.size()) < n)
    throw ConfigError("only " + std::to_string(pairs.size()) + " matched explanation pairs; " +
                      std::to_string(n) + " requested");

  std::ostringstream doc;
  doc << "# Explanation survey\n\n"
      << "Each case shows the task, one situation, and two explanations for the\n"
      << "decision an automated assistant made there. Please answer the three\n"
      << "questions after reading both explanations.\n";
  json key = json::array();
  for (int c = 0; c < n; ++c) {
    const auto& [ia, ib] = pairs[static_cast<size_t>(c)];
    // Deterministic blinding: per-case coin flip of which log appears first.
    Rng coin(derive_seed(seed, 0x50, static_cast<uint64_t>(c), 0));
    const bool swap = coin.uniform() < 0.5;
    const ExplRecord& first = swap ? b[ib] : a[ia];
    const ExplRecord& second = swap ? a[ia] : b[ib];
    doc << "\n---\n\n## Case " << (c + 1) << "\n\n";
    doc << "Task:\n" << task << "\n\n";
    doc << "Situation:\n" << first.state_text << "\n\n";
    doc << "Explanation A:\n" << first.explanation << "\n\n";
    doc << "Explanation B:\n" << second.explanation << "\n\n";
    doc << "Q1. Which explanation do you find better? (A / B / no preference)\n";
    doc << "Q2. Rate how well Explanation A grounds its claims in the situation shown"
           " above. (1 = not at all, 5 = completely)\n";
    doc << "Q3. Rate how well Explanation B grounds its claims in the situation shown"
           " above. (1 = not at all, 5 = completely)\n";
    key.push_back(json{{"case", c + 1},
                       {"state_sha256", a[ia].sha},
                       {"explanation_a_from", swap ? "b" : "a"},
                       {"explanation_b_from", swap ? "a" : "b"}});
  }

  if (out_path.empty())
    std::cout << doc.str();
  else
    write_text_file(out_path, doc.str());
  if (!key_path.empty())
    write_text_file(key_path,
                    json{{"log_a", log_a}, {"log_b", log_b}, {"cases", key}}.dump(2) + "\n");
  if (!out_path.empty())
    std::cout << "[survey] wrote " << n << " cases to " << out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// replay
// ---------------------------------------------------------------------------

int run_replay(const std::string& config_path, const std::string& log_path,
               long long max_printed) {
  const RunConfig cfg = load_run_config(config_path);
  const ReplayResult rc = replay_log(cfg, log_path, &std::cerr, max_printed);
  std::cout << "[replay] workers=" << rc.workers << " steps=" << rc.steps
            << " episodes=" << rc.episodes << " generations=" << rc.generations
            << " mismatches=" << rc.mismatches << "\n";
  return rc.ok() ? 0 : 1;
}

}  // namespace

// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  CLI::App app{"Rule-selection agents for constrained allocation tasks"};
  app.require_subcommand(1);

  // Shared config/override options, one set per subcommand that loads a config.
  struct Common {
    std::string config;
    Overrides ov;
  };
  auto add_common = [](CLI::App* cmd, Common& c, bool with_overrides = true) {
    cmd->add_option("--config", c.config, "run configuration (TOML)")
        ->required()
        ->check(CLI::ExistingFile);
    if (with_overrides) {
      cmd->add_option("--variant", c.ov.variant,
                      "override variant: rbrl|tbrl|rules-only|cot|random-rule|ppo");
      cmd->add_option("--backend", c.ov.backend, "override backend: scripted|remote");
      cmd->add_option("--steps", c.ov.steps, "override total environment steps");
    }
  };

  // train ---------------------------------------------------------------
  Common tr;
  std::string tr_resume;
  auto* train_cmd = app.add_subcommand("train", "train one run per seed");
  add_common(train_cmd, tr);
  train_cmd->add_option("--seed", tr.ov.seeds, "override the seed list");
  train_cmd->add_option("--out-dir", tr.ov.out_dir, "override the output directory");
  train_cmd->add_option("--name", tr.ov.name, "override the run name");
  train_cmd->add_option("--explain-every", tr.ov.explain_every,
                        "log an explanation every N global steps");
  train_cmd->add_option("--resume", tr_resume, "initialize the learner from a checkpoint")
      ->check(CLI::ExistingFile);

  // eval ----------------------------------------------------------------
  Common ev;
  std::string ev_ckpt, ev_out, ev_records;
  int ev_episodes = 100;
  uint64_t ev_seed = 1000;
  bool ev_sample = false, ev_expl = false;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a policy on fresh episodes");
  add_common(eval_cmd, ev);
  eval_cmd->add_option("--checkpoint", ev_ckpt, "restore the learner before evaluating")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--episodes", ev_episodes, "number of evaluation episodes");
  eval_cmd->add_option("--seed", ev_seed, "evaluation seed");
  eval_cmd->add_flag("--sample", ev_sample, "sample from the policy instead of greedy");
  eval_cmd->add_flag("--explanations", ev_expl, "generate an explanation for every step");
  eval_cmd->add_option("--out", ev_out, "write the summary JSON here");
  eval_cmd->add_option("--records", ev_records, "write per-step records (JSONL) here");

  // ewma ----------------------------------------------------------------
  std::string ew_csv, ew_col, ew_x = "global_step", ew_out;
  double ew_hl = 100.0;
  auto* ewma_cmd = app.add_subcommand("ewma", "smooth one metrics column");
  ewma_cmd->add_option("--csv", ew_csv, "metrics CSV")->required()->check(CLI::ExistingFile);
  ewma_cmd->add_option("--column", ew_col, "column to smooth")->required();
  ewma_cmd->add_option("--half-life", ew_hl, "half-life in samples")
      ->check(CLI::PositiveNumber);
  ewma_cmd->add_option("--x-column", ew_x, "x-axis column (default global_step)");
  ewma_cmd->add_option("--out", ew_out, "output CSV (stdout when omitted)");

  // plot ----------------------------------------------------------------
  std::vector<std::string> pl_csvs;
  std::string pl_col, pl_x = "global_step", pl_title, pl_out;
  double pl_hl = 0.0;
  bool pl_per_seed = false;
  auto* plot_cmd = app.add_subcommand("plot", "render metric curves (mean +/- SE) to SVG");
  plot_cmd->add_option("--csv", pl_csvs, "metrics CSV (repeat per run)")
      ->required()
      ->check(CLI::ExistingFile);
  plot_cmd->add_option("--column", pl_col, "column to plot")->required();
  plot_cmd->add_option("--x-column", pl_x, "x-axis column (default global_step)");
  plot_cmd->add_option("--half-life", pl_hl, "EWMA half-life (0 = raw)");
  plot_cmd->add_option("--title", pl_title, "plot title");
  plot_cmd->add_flag("--per-seed", pl_per_seed, "also draw each run's curve");
  plot_cmd->add_option("--out", pl_out, "output SVG path")->required();

  // compare ---------------------------------------------------------------
  Common cp;
  std::string cp_a, cp_b, cp_out, cp_details;
  long long cp_max = 0;
  auto* compare_cmd =
      app.add_subcommand("compare", "pairwise judge two logs' explanations on shared states");
  add_common(compare_cmd, cp, false);
  compare_cmd->add_option("--a", cp_a, "first log (JSONL)")->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--b", cp_b, "second log (JSONL)")->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--max", cp_max, "limit the number of pairs (0 = all)");
  compare_cmd->add_option("--out", cp_out, "write the summary JSON here");
  compare_cmd->add_option("--details", cp_details, "write per-pair verdicts (JSONL) here");

  // export-survey ----------------------------------------------------------
  Common sv;
  std::string sv_a, sv_b, sv_out, sv_key;
  int sv_n = 10;
  uint64_t sv_seed = 7;
  auto* survey_cmd =
      app.add_subcommand("export-survey", "emit blinded explanation-comparison cases");
  add_common(survey_cmd, sv, false);
  survey_cmd->add_option("--a", sv_a, "first log (JSONL)")->required()->check(CLI::ExistingFile);
  survey_cmd->add_option("--b", sv_b, "second log (JSONL)")->required()->check(CLI::ExistingFile);
  survey_cmd->add_option("--n", sv_n, "number of cases")->check(CLI::PositiveNumber);
  survey_cmd->add_option("--seed", sv_seed, "blinding seed");
  survey_cmd->add_option("--out", sv_out, "output file (stdout when omitted)");
  survey_cmd->add_option("--key", sv_key, "write the unblinding key JSON here");

  // replay ------------------------------------------------------------------
  Common rp;
  std::string rp_log;
  long long rp_max_printed = 10;
  auto* replay_cmd =
      app.add_subcommand("replay", "re-run a training log and verify every record");
  add_common(replay_cmd, rp, false);
  replay_cmd->add_option("--log", rp_log, "episodes.jsonl from a training run")
      ->required()
      ->check(CLI::ExistingFile);
  replay_cmd->add_option("--max-mismatches", rp_max_printed, "how many mismatches to print");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return run_train(tr.config, tr.ov, tr_resume);
    if (eval_cmd->parsed())
      return run_eval(ev.config, ev.ov, ev_ckpt, ev_episodes, ev_seed, ev_sample, ev_expl,
                      ev_out, ev_records);
    if (ewma_cmd->parsed()) return run_ewma(ew_csv, ew_col, ew_hl, ew_x, ew_out);
    if (plot_cmd->parsed())
      return run_plot(pl_csvs, pl_col, pl_x, pl_hl, pl_title, pl_out, pl_per_seed);
    if (compare_cmd->parsed())
      return run_compare(cp.config, cp_a, cp_b, cp_max, cp_out, cp_details);
    if (survey_cmd->parsed())
      return run_survey(sv.config, sv_a, sv_b, sv_n, sv_seed, sv_out, sv_key);
    if (replay_cmd->parsed()) return run_replay(rp.config, rp_log, rp_max_printed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
