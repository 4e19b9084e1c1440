#include "rbrl/replay.hpp"

#include "json.hpp"

#include "rbrl/text.hpp"

#include <fstream>
#include <map>
#include <ostream>
#include <vector>

namespace rbrl {

namespace {

using json = nlohmann::json;

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

json rule_to_json(const RuleText& r) {
  return json{{"background", r.background},
              {"rule_statement", r.rule_statement},
              {"state_relevance", r.state_relevance}};
}

class MismatchReporter {
 public:
  MismatchReporter(std::ostream* err, long long max_printed)
      : err_(err), max_printed_(max_printed) {}

  template <typename T, typename U>
  bool check(long long global_step, const std::string& field, const T& expected, const U& got) {
    if (json(expected) == json(got)) return true;
    ++count_;
    if (err_ && count_ <= max_printed_)
      *err_ << "mismatch at global_step=" << global_step << " field=" << field
            << " logged=" << json(expected).dump() << " replayed=" << json(got).dump() << "\n";
    if (err_ && count_ == max_printed_ + 1) *err_ << "(further mismatches suppressed)\n";
    return false;
  }

  long long count() const { return count_; }

 private:
  std::ostream* err_;
  long long max_printed_;
  long long count_ = 0;
};

}  // namespace

ReplayResult replay_log(const RunConfig& cfg, const std::string& log_path, std::ostream* err,
                        long long max_printed) {
  const std::vector<json> lines = read_jsonl(log_path);
  if (lines.empty() || lines[0].value("type", "") != "header")
    throw ConfigError(log_path + ": missing header record");
  const json& header = lines[0];

  const std::string variant_name = header.value("variant", "rbrl");
  const Variant variant = variant_from_string(variant_name);
  const uint64_t seed = header.value("seed", 0ull);
  const double coef = header.value("rule_reward_coef", 1.0);

  if (header.value("env", "") != cfg.env_id)
    throw ConfigError("log env '" + header.value("env", "") + "' != config env '" + cfg.env_id +
                      "'");
  {
    Gateway probe(cfg.gateway, cfg.backend_factory()());
    if (header.value("backend", "") != probe.backend().name())
      throw ConfigError("log backend '" + header.value("backend", "") + "' != config backend '" +
                        probe.backend().name() + "'");
    if (header.contains("templates_sha256") &&
        header["templates_sha256"].get<std::string>() != probe.templates_hash())
      throw ConfigError("prompt templates differ from the ones used for this log");
  }

  // Per-worker record streams (training interleaves workers step by step).
  std::map<int, std::vector<const json*>> steps_by_worker;
  std::map<int, std::vector<const json*>> episodes_by_worker;
  for (size_t i = 1; i < lines.size(); ++i) {
    const json& j = lines[i];
    const std::string type = j.value("type", "");
    if (type == "step") steps_by_worker[j.value("env_id", 0)].push_back(&j);
    else if (type == "episode") episodes_by_worker[j.value("env_id", 0)].push_back(&j);
  }

  ReplayResult rc;
  MismatchReporter rep(err, max_printed);

  for (const auto& [worker_id, recs] : steps_by_worker) {
    EnvPtr env = cfg.env_factory()();
    Gateway gw(cfg.gateway, cfg.backend_factory()());
    Rng action_rng(derive_seed(seed, 0xa2, static_cast<uint64_t>(worker_id), 0));
    size_t next_episode_rec = 0;

    long long episode = -1;
    int expected_step = 0;
    double ep_env_return = 0.0, ep_combined_return = 0.0;

    for (const json* jp : recs) {
      const json& r = *jp;
      const long long gs = r.value("global_step", -1ll);
      const long long rec_episode = r.value("episode", 0ll);

      if (rec_episode != episode) {
        rep.check(gs, "episode_order", episode + 1, rec_episode);
        episode = rec_episode;
        env->reset(derive_seed(seed, 0xe0 + static_cast<uint64_t>(worker_id),
                               static_cast<uint64_t>(episode), 0));
        gw.backend().seed_episode(derive_seed(seed, 0xe0 + static_cast<uint64_t>(worker_id),
                                              static_cast<uint64_t>(episode), 1));
        expected_step = 0;
        ep_env_return = 0.0;
        ep_combined_return = 0.0;
        ++rc.episodes;
      }
      rep.check(gs, "step_in_episode", r.value("step_in_episode", -1), expected_step);

      // Language phase, in the exact order training issued the calls.
      const PromptBundle bundle = gw.bundle(*env);
      rep.check(gs, "state_text", r.value("state_text", ""), bundle.state_text);
      rep.check(gs, "state_sha256", r.value("state_sha256", ""), sha256_hex(bundle.state_text));

      std::string thought;
      std::vector<RuleText> rules;
      std::vector<std::string> candidates;
      bool padded = false;
      switch (variant) {
        case Variant::kRbrl:
        case Variant::kRulesOnly:
        case Variant::kRandomRule: {
          thought = gw.thought(bundle);
          RuleSet rs = gw.rules(bundle, thought, *env);
          rules = rs.rules;
          padded = rs.padded;
          rc.generations += 2;
          break;
        }
        case Variant::kTbrl: {
          candidates = gw.candidates(bundle, *env);
          for (const auto& c : candidates) rules.push_back(RuleText{"", c, ""});
          rc.generations += 1;
          break;
        }
        case Variant::kCot: {
          thought = gw.thought(bundle);
          rc.generations += 1;
          break;
        }
      }
      rep.check(gs, "thought", r.value("thought", ""), thought);
      {
        json logged_rules = r.value("rules", json::array());
        json replayed = json::array();
        for (const auto& rr : rules) replayed.push_back(rule_to_json(rr));
        rep.check(gs, "rules", logged_rules, replayed);
        rep.check(gs, "rules_padded", r.value("rules_padded", false), padded);
      }

      const int chosen = r.value("chosen", -1);
      if (variant == Variant::kCot) {
        rep.check(gs, "chosen", -1, chosen);
      } else if (chosen < 0 || chosen >= static_cast<int>(rules.size())) {
        rep.check(gs, "chosen_in_range", true, false);
        ++rc.steps;
        continue;  // cannot act without a valid logged selection
      } else if (variant == Variant::kRulesOnly) {
        RuleSet rs;
        rs.rules = rules;
        const int sel = gw.select_rule(bundle, thought, rs, action_rng);
        rep.check(gs, "chosen", chosen, sel);
      }

      // Action, environment transition, judge, explanation.
      bool fallback = false;
      int action = 0;
      switch (variant) {
        case Variant::kRbrl:
        case Variant::kRulesOnly:
        case Variant::kRandomRule:
          action = gw.action(bundle, thought, rules[static_cast<size_t>(chosen)], *env,
                             action_rng, &fallback);
          break;
        case Variant::kTbrl:
          action = gw.action_from_thought(bundle, candidates[static_cast<size_t>(chosen)], *env,
                                          action_rng, &fallback);
          break;
        case Variant::kCot:
          action = gw.action_from_thought(bundle, thought, *env, action_rng, &fallback);
          break;
      }
      ++rc.generations;
      rep.check(gs, "action", r.value("action", -1), action);
      rep.check(gs, "action_fallback", r.value("action_fallback", false), fallback);

      const StepOutcome out = env->step(action);
      rep.check(gs, "env_reward", r.value("env_reward", 0.0), out.reward);
      rep.check(gs, "terminated", r.value("terminated", false), out.terminated);
      rep.check(gs, "truncated", r.value("truncated", false), out.truncated);
      rep.check(gs, "note", r.value("note", ""), out.note);

      double rule_reward = 0.0;
      if (variant_uses_rules(variant)) {
        const JudgeScores js = gw.judge(bundle, rules[static_cast<size_t>(chosen)], action, *env);
        ++rc.generations;
        const json logged_er = r.value("er", json::array());
        rep.check(gs, "er", logged_er, json{js.er1, js.er2, js.er3});
        rep.check(gs, "judge_unparsed", r.value("judge_unparsed", false), js.unparsed);
        rule_reward = js.rule_reward();
      }
      rep.check(gs, "rule_reward", r.value("rule_reward", 0.0), rule_reward);
      const double combined = out.reward + coef * rule_reward;
      rep.check(gs, "combined_reward", r.value("combined_reward", 0.0), combined);

      if (r.contains("explanation") && variant_uses_rules(variant)) {
        const std::string expl =
            gw.explanation(bundle, thought, rules[static_cast<size_t>(chosen)], action, *env);
        ++rc.generations;
        rep.check(gs, "explanation", r["explanation"].get<std::string>(), expl);
      }

      ep_env_return += out.reward;
      ep_combined_return += combined;
      ++rc.steps;

      if (out.done()) {
        auto it = episodes_by_worker.find(worker_id);
        if (it != episodes_by_worker.end() && next_episode_rec < it->second.size()) {
          const json& er = *it->second[next_episode_rec++];
          rep.check(gs, "episode_record.episode", er.value("episode", -1ll), episode);
          rep.check(gs, "episode_record.steps", er.value("steps", -1), expected_step + 1);
          rep.check(gs, "episode_record.env_return", er.value("env_return", 0.0), ep_env_return);
          rep.check(gs, "episode_record.combined_return", er.value("combined_return", 0.0),
                    ep_combined_return);
        }
        expected_step = 0;
        // The next record for this worker starts a fresh episode; the reset
        // fires when its episode index changes.
      } else {
        ++expected_step;
      }
    }
  }

  rc.workers = static_cast<long long>(steps_by_worker.size());
  rc.mismatches = rep.count();
  return rc;
}

}  // namespace rbrl
