#include "rbrl/gateway.hpp"

#include "rbrl/prompt_templates.gen.hpp"
#include "rbrl/text.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace rbrl {

using nlohmann::json;

void GatewayConfig::validate() const {
  if (num_rules < 1) throw ConfigError("gateway: num_rules must be >= 1");
  if (max_retries < 0) throw ConfigError("gateway: max_retries must be >= 0");
  if (temperature < 0.0) throw ConfigError("gateway: temperature must be >= 0");
}

std::string rule_display(const RuleText& rule) {
  return "Background: " + rule.background + "\nRule: " + rule.rule_statement +
         "\nRelevance: " + rule.state_relevance;
}

std::string rule_json(const RuleText& rule) {
  json j;
  j["background"] = rule.background;
  j["rule_statement"] = rule.rule_statement;
  j["state_relevance"] = rule.state_relevance;
  return j.dump();
}

Gateway::Gateway(const GatewayConfig& cfg, std::shared_ptr<LlmBackend> backend)
    : cfg_(cfg), backend_(std::move(backend)) {
  cfg_.validate();
  if (!backend_) throw ConfigError("gateway: backend must be set");
  templates_ = embedded::prompt_templates();
  if (!cfg_.prompts_dir.empty()) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(cfg_.prompts_dir))
      throw ConfigError("gateway: prompts_dir is not a directory: " + cfg_.prompts_dir);
    for (const auto& entry : fs::directory_iterator(cfg_.prompts_dir)) {
      if (entry.path().extension() != ".txt") continue;
      std::ifstream f(entry.path());
      std::stringstream ss;
      ss << f.rdbuf();
      templates_[entry.path().stem().string()] = ss.str();
    }
  }
  for (const char* required : {"thought", "rules", "candidates", "action", "action_from_thought",
                               "select_rule", "explanation", "judge_rules", "judge_action",
                               "compare", "hallucination"}) {
    if (!templates_.count(required))
      throw ConfigError(std::string("gateway: missing prompt template '") + required + "'");
  }
}

const std::string& Gateway::template_text(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw ConfigError("gateway: no template named '" + name + "'");
  return it->second;
}

std::string Gateway::templates_hash() const {
  std::string blob;
  for (const auto& [name, body] : templates_) {
    blob += name;
    blob += '\0';
    blob += body;
    blob += '\0';
  }
  return sha256_hex(blob);
}

std::string Gateway::render(const std::string& template_name,
                            const std::map<std::string, std::string>& vars) const {
  std::string out = template_text(template_name);
  for (const auto& [k, v] : vars) out = replace_all(out, "{{" + k + "}}", v);
  return trim(out);
}

PromptBundle Gateway::bundle(const Environment& env) const { return bundle(env, env.state()); }

PromptBundle Gateway::bundle(const Environment& env, const NumericState& s) const {
  PromptBundle p;
  p.task = env.task_text();
  p.state_text = env.describe_state(s);
  p.actions = env.action_space_text();
  p.constraints = env.budget().text;
  return p;
}

std::string Gateway::call(const std::string& rendered) {
  CompletionRequest req;
  req.prompt = rendered;
  req.temperature = cfg_.temperature;
  return backend_->complete(req);
}

namespace {

std::map<std::string, std::string> base_vars(const PromptBundle& p) {
  return {{"task", p.task},
          {"state", p.state_text},
          {"actions", p.actions},
          {"constraints", p.constraints}};
}

// Extracts the outermost JSON array from a completion that may carry prose
// or code fences around it.
std::optional<json> extract_json_array(const std::string& text) {
  size_t a = text.find('[');
  size_t b = text.rfind(']');
  if (a == std::string::npos || b == std::string::npos || b <= a) return std::nullopt;
  json parsed = json::parse(text.substr(a, b - a + 1), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_array()) return std::nullopt;
  return parsed;
}

std::optional<RuleText> rule_from_json(const json& j) {
  if (!j.is_object() || j.size() != 3) return std::nullopt;
  if (!j.contains("background") || !j.contains("rule_statement") ||
      !j.contains("state_relevance"))
    return std::nullopt;
  if (!j["background"].is_string() || !j["rule_statement"].is_string() ||
      !j["state_relevance"].is_string())
    return std::nullopt;
  RuleText r;
  r.background = j["background"].get<std::string>();
  r.rule_statement = j["rule_statement"].get<std::string>();
  r.state_relevance = j["state_relevance"].get<std::string>();
  return r;
}

// Finds "yes"/"no" following a marker; nullopt when neither occurs.
std::optional<int> yes_no_after(const std::string& lower, const std::string& marker) {
  size_t pos = marker.empty() ? 0 : lower.find(marker);
  if (pos == std::string::npos) return std::nullopt;
  size_t y = lower.find("yes", pos);
  size_t n = lower.find("no", pos);
  if (y == std::string::npos && n == std::string::npos) return std::nullopt;
  if (n == std::string::npos) return 1;
  if (y == std::string::npos) return 0;
  return y < n ? 1 : 0;
}

}  // namespace

std::string Gateway::thought(const PromptBundle& p) {
  return trim(call(render("thought", base_vars(p))));
}

RuleSet Gateway::rules(const PromptBundle& p, const std::string& thought,
                       const Environment& env) {
  auto vars = base_vars(p);
  vars["thought"] = thought;
  vars["num_rules"] = std::to_string(cfg_.num_rules);
  const std::string rendered = render("rules", vars);

  RuleSet rs;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    std::string reply;
    try {
      reply = call(rendered);
    } catch (const TransportError&) {
      continue;
    }
    auto arr = extract_json_array(reply);
    if (!arr) continue;
    std::vector<RuleText> valid;
    for (const auto& item : *arr) {
      if (auto r = rule_from_json(item)) valid.push_back(*r);
      if (static_cast<int>(valid.size()) == cfg_.num_rules) break;
    }
    if (static_cast<int>(valid.size()) == cfg_.num_rules) {
      rs.rules = std::move(valid);
      return rs;
    }
    if (attempt == cfg_.max_retries && !valid.empty()) rs.rules = std::move(valid);
  }

  // Pad from environment examples (cycled), flagging the degradation.
  rs.padded = true;
  ++stats_.padded_rule_sets;
  auto examples = env.example_rules();
  if (examples.empty()) {
    examples.push_back({"No domain guidance was available.",
                        "Choose the first allowed action when uncertain.",
                        ""});
  }
  size_t k = 0;
  while (static_cast<int>(rs.rules.size()) < cfg_.num_rules) {
    rs.rules.push_back(examples[k % examples.size()]);
    ++k;
  }
  return rs;
}

std::vector<std::string> Gateway::candidates(const PromptBundle& p, const Environment& env) {
  auto vars = base_vars(p);
  vars["num_rules"] = std::to_string(cfg_.num_rules);
  const std::string rendered = render("candidates", vars);
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    std::string reply;
    try {
      reply = call(rendered);
    } catch (const TransportError&) {
      continue;
    }
    auto arr = extract_json_array(reply);
    if (!arr) continue;
    std::vector<std::string> out;
    for (const auto& item : *arr) {
      if (item.is_string()) out.push_back(item.get<std::string>());
      if (static_cast<int>(out.size()) == cfg_.num_rules) break;
    }
    if (static_cast<int>(out.size()) == cfg_.num_rules) return out;
  }
  // Degrade to example-rule statements as candidate analyses.
  ++stats_.padded_rule_sets;
  std::vector<std::string> out;
  auto examples = env.example_rules();
  size_t k = 0;
  while (static_cast<int>(out.size()) < cfg_.num_rules) {
    out.push_back(examples.empty() ? "Act conservatively."
                                   : examples[k % examples.size()].rule_statement);
    ++k;
  }
  return out;
}

int Gateway::action(const PromptBundle& p, const std::string& thought, const RuleText& rule,
                    const Environment& env, Rng& fallback_rng, bool* fallback_used) {
  auto vars = base_vars(p);
  vars["thought"] = thought;
  vars["rule"] = rule_display(rule);
  vars["action_format"] = env.action_format_text();
  const std::string rendered = render("action", vars);
  if (fallback_used) *fallback_used = false;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    try {
      if (auto a = env.parse_action(call(rendered))) return *a;
    } catch (const TransportError&) {
    }
  }
  ++stats_.action_fallbacks;
  if (fallback_used) *fallback_used = true;
  return fallback_rng.uniform_int(0, env.spec().num_actions - 1);
}

int Gateway::action_from_thought(const PromptBundle& p, const std::string& thought,
                                 const Environment& env, Rng& fallback_rng,
                                 bool* fallback_used) {
  auto vars = base_vars(p);
  vars["thought"] = thought;
  vars["action_format"] = env.action_format_text();
  const std::string rendered = render("action_from_thought", vars);
  if (fallback_used) *fallback_used = false;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    try {
      if (auto a = env.parse_action(call(rendered))) return *a;
    } catch (const TransportError&) {
    }
  }
  ++stats_.action_fallbacks;
  if (fallback_used) *fallback_used = true;
  return fallback_rng.uniform_int(0, env.spec().num_actions - 1);
}

int Gateway::select_rule(const PromptBundle& p, const std::string& thought, const RuleSet& rs,
                         Rng& fallback_rng, bool* fallback_used) {
  std::ostringstream listing;
  for (size_t i = 0; i < rs.rules.size(); ++i) {
    listing << "[" << i << "] " << rs.rules[i].rule_statement << "\n";
  }
  auto vars = base_vars(p);
  vars["thought"] = thought;
  vars["rules"] = trim(listing.str());
  const std::string rendered = render("select_rule", vars);
  const int q = static_cast<int>(rs.rules.size());
  if (fallback_used) *fallback_used = false;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    std::string reply;
    try {
      reply = call(rendered);
    } catch (const TransportError&) {
      continue;
    }
    if (auto idx = integer_after(reply, "rule")) {
      if (*idx >= 0 && *idx < q) return static_cast<int>(*idx);
    }
    auto ints = extract_integers(reply);
    if (ints.size() == 1 && ints[0] >= 0 && ints[0] < q) return static_cast<int>(ints[0]);
  }
  ++stats_.select_fallbacks;
  if (fallback_used) *fallback_used = true;
  return fallback_rng.uniform_int(0, q - 1);
}

std::string Gateway::explanation(const PromptBundle& p, const std::string& thought,
                                 const RuleText& rule, int action_id, const Environment& env) {
  auto vars = base_vars(p);
  vars["thought"] = thought;
  vars["rule"] = rule_display(rule);
  vars["action"] = env.action_text(action_id);
  return trim(call(render("explanation", vars)));
}

JudgeScores Gateway::judge(const PromptBundle& p, const RuleText& rule, int action_id,
                           const Environment& env) {
  JudgeScores scores;
  auto vars = base_vars(p);
  vars["rule"] = rule_display(rule);

  bool got12 = false;
  for (int attempt = 0; attempt <= cfg_.max_retries && !got12; ++attempt) {
    try {
      std::string reply = to_lower(call(render("judge_rules", vars)));
      auto e1 = yes_no_after(reply, "er1");
      auto e2 = yes_no_after(reply, "er2");
      if (e1 && e2) {
        scores.er1 = *e1;
        scores.er2 = *e2;
        got12 = true;
      }
    } catch (const TransportError&) {
    }
  }

  vars["action"] = env.action_text(action_id);
  bool got3 = false;
  for (int attempt = 0; attempt <= cfg_.max_retries && !got3; ++attempt) {
    try {
      std::string reply = to_lower(call(render("judge_action", vars)));
      if (auto e3 = yes_no_after(reply, "")) {
        scores.er3 = *e3;
        got3 = true;
      }
    } catch (const TransportError&) {
    }
  }

  if (!got12 || !got3) {
    scores.unparsed = true;
    ++stats_.judge_unparsed;
  }
  return scores;
}

namespace {
std::optional<CompareVerdict> parse_compare_reply(const std::string& reply) {
  std::string t = to_lower(trim(reply));
  if (t.find("tie") != std::string::npos) return CompareVerdict::kTie;
  if (t == "a" || t.rfind("a.", 0) == 0 || t.rfind("a\n", 0) == 0) return CompareVerdict::kA;
  if (t == "b" || t.rfind("b.", 0) == 0 || t.rfind("b\n", 0) == 0) return CompareVerdict::kB;
  size_t ea = t.find("explanation a");
  size_t eb = t.find("explanation b");
  if (ea != std::string::npos && eb == std::string::npos) return CompareVerdict::kA;
  if (eb != std::string::npos && ea == std::string::npos) return CompareVerdict::kB;
  return std::nullopt;
}
}  // namespace

CompareVerdict Gateway::compare(const std::string& task, const std::string& state_text,
                                const std::string& a, const std::string& b) {
  auto ask = [&](const std::string& first, const std::string& second)
      -> std::optional<CompareVerdict> {
    std::map<std::string, std::string> vars = {
        {"task", task}, {"state", state_text}, {"a", first}, {"b", second}};
    try {
      return parse_compare_reply(call(render("compare", vars)));
    } catch (const TransportError&) {
      return std::nullopt;
    }
  };

  auto v1 = ask(a, b);
  auto v2 = ask(b, a);
  if (!v1 || !v2) return CompareVerdict::kTie;
  // Undo the swap in the second verdict.
  CompareVerdict v2u = *v2 == CompareVerdict::kA   ? CompareVerdict::kB
                       : *v2 == CompareVerdict::kB ? CompareVerdict::kA
                                                   : CompareVerdict::kTie;
  if (*v1 == v2u) return *v1;
  return CompareVerdict::kTie;
}

bool Gateway::hallucination(const std::string& task, const std::string& state_text,
                            const std::string& explanation) {
  std::map<std::string, std::string> vars = {
      {"task", task}, {"state", state_text}, {"explanation", explanation}};
  try {
    std::string reply = to_lower(call(render("hallucination", vars)));
    auto v = yes_no_after(reply, "hallucinated");
    return v.value_or(0) == 1;
  } catch (const TransportError&) {
    return false;  // an unreachable judge flags nothing
  }
}

}  // namespace rbrl
