#include "doctest.h"

#include "rbrl/embedding.hpp"
#include "rbrl/gateway.hpp"
#include "rbrl/heat_env.hpp"
#include "rbrl/remote.hpp"
#include "rbrl/scripted_backend.hpp"
#include "rbrl/text.hpp"
#include "rbrl/toy_env.hpp"
#include "rbrl/vitals_env.hpp"

#include "httplib.h"
#include "json.hpp"

#include <atomic>
#include <set>
#include <thread>

using namespace rbrl;

namespace {

// Canned backend for exercising the gateway's parsing and degradation paths.
class CannedBackend : public LlmBackend {
 public:
  explicit CannedBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const CompletionRequest&) override {
    if (replies_.empty()) throw TransportError("canned: out of replies");
    std::string r = replies_.front();
    if (replies_.size() > 1) replies_.erase(replies_.begin());
    if (r == "<throw>") throw TransportError("canned: forced failure");
    return r;
  }
  std::string name() const override { return "canned"; }

 private:
  std::vector<std::string> replies_;
};

std::shared_ptr<Gateway> make_scripted_gateway(ScriptedOptions opts = {}, int num_rules = 5) {
  GatewayConfig gc;
  gc.num_rules = num_rules;
  auto backend = std::make_shared<ScriptedBackend>(opts, 7);
  return std::make_shared<Gateway>(gc, backend);
}

}  // namespace

TEST_CASE("gateway renders templates and hashes them stably") {
  auto gw = make_scripted_gateway();
  std::string r = gw->render("thought", {{"task", "T"},
                                         {"state", "S"},
                                         {"actions", "A"},
                                         {"constraints", "C"}});
  CHECK(r.find("TASK:\nT") != std::string::npos);
  CHECK(r.find("CURRENT STATE:\nS") != std::string::npos);
  CHECK(r.find("{{") == std::string::npos);

  const std::string h1 = gw->templates_hash();
  CHECK(h1.size() == 64);
  CHECK(h1 == make_scripted_gateway()->templates_hash());
  CHECK_THROWS_AS(gw->template_text("nope"), ConfigError);
}

TEST_CASE("scripted toy pipeline: thought, rules, action, judge") {
  ToyConfig tc;
  ToyEnv env(tc);
  env.reset(3);
  auto gw = make_scripted_gateway();
  gw->backend().seed_episode(11);

  PromptBundle p = gw->bundle(env);
  CHECK(p.state_text.find("Position") != std::string::npos);

  std::string th = gw->thought(p);
  CHECK(th.find("position") != std::string::npos);
  CHECK(th.find("leaning toward action") != std::string::npos);

  RuleSet rs = gw->rules(p, th, env);
  REQUIRE(rs.rules.size() == 5);
  CHECK_FALSE(rs.padded);
  // Distinct mode covers all five offsets, each rule naming a different one.
  std::set<long long> offsets;
  for (const auto& r : rs.rules) {
    auto k = integer_after(r.rule_statement, "position +");
    REQUIRE(k.has_value());
    offsets.insert(*k);
    CHECK_FALSE(r.background.empty());
    CHECK(r.state_relevance.find("position is") != std::string::npos);
  }
  CHECK(offsets.size() == 5);

  // Applying rule k from position pos must give exactly (pos + k) mod 5.
  Rng rng(99);
  const int pos = static_cast<int>(*integer_after(p.state_text, "Position"));
  for (const auto& r : rs.rules) {
    bool fell_back = true;
    const int a = gw->action(p, th, r, env, rng, &fell_back);
    CHECK_FALSE(fell_back);
    const int k = static_cast<int>(*integer_after(r.rule_statement, "position +"));
    CHECK(a == (pos + k) % 5);

    JudgeScores js = gw->judge(p, r, a, env);
    CHECK(js.er1 == 1);  // names a concrete formula
    CHECK(js.er2 == 1);  // cites the true position
    CHECK(js.er3 == 1);  // the action matches the prescription
    CHECK(js.rule_reward() == doctest::Approx(1.0));

    JudgeScores wrong = gw->judge(p, r, (a + 1) % 5, env);
    CHECK(wrong.er3 == 0);
    CHECK(wrong.rule_reward() == doctest::Approx(2.0 / 3.0));
  }
}

TEST_CASE("scripted toy paired mode separates judge scores from actions") {
  ToyConfig tc;
  ToyEnv env(tc);
  env.reset(5);
  ScriptedOptions so;
  so.toy_rules = "paired";
  so.toy_offset_hint = tc.optimal_offset;
  auto gw = make_scripted_gateway(so);
  gw->backend().seed_episode(2);

  PromptBundle p = gw->bundle(env);
  std::string th = gw->thought(p);
  RuleSet rs = gw->rules(p, th, env);
  REQUIRE(rs.rules.size() == 5);

  Rng rng(1);
  const int pos = static_cast<int>(*integer_after(p.state_text, "Position"));
  const int expected = (pos + tc.optimal_offset) % tc.num_actions;
  int crisp = 0, vague = 0;
  for (const auto& r : rs.rules) {
    // Every rule, crisp or vague, resolves to the same action here.
    CHECK(gw->action(p, th, r, env, rng) == expected);
    JudgeScores js = gw->judge(p, r, expected, env);
    if (js.er1 == 1) {
      ++crisp;
      CHECK(js.rule_reward() == doctest::Approx(1.0));
    } else {
      ++vague;
      CHECK(js.rule_reward() == doctest::Approx(0.0));
    }
  }
  CHECK(crisp >= 2);
  CHECK(vague >= 2);
}

TEST_CASE("scripted heat rules respect cutoffs and the budget") {
  HeatConfig hc;
  HeatAlertsEnv env(hc);
  env.reset(17);
  auto gw = make_scripted_gateway();
  gw->backend().seed_episode(17);

  PromptBundle p = gw->bundle(env);
  std::string th = gw->thought(p);
  CHECK(th.find("heat index") != std::string::npos);

  RuleSet rs = gw->rules(p, th, env);
  REQUIRE(rs.rules.size() == 5);
  const double heat = *number_after(p.state_text, "heat index:");
  const int remaining = static_cast<int>(*integer_after(p.state_text, "budget:"));

  Rng rng(4);
  for (const auto& r : rs.rules) {
    if (auto cutoff = number_after(r.rule_statement, "exceeds")) {
      const int a = gw->action(p, th, r, env, rng);
      const int want = (heat > *cutoff && remaining > 0) ? 1 : 0;
      CHECK(a == want);
      CHECK(gw->judge(p, r, a, env).er3 == 1);
      CHECK(gw->judge(p, r, 1 - a, env).er3 == 0);
      // Relevance cites the live heat index and remaining budget.
      CHECK(gw->judge(p, r, a, env).er2 == 1);
    }
  }
}

TEST_CASE("scripted heat judge rejects stale citations") {
  HeatConfig hc;
  HeatAlertsEnv env(hc);
  env.reset(21);
  auto gw = make_scripted_gateway();

  PromptBundle p = gw->bundle(env);
  const double heat = *number_after(p.state_text, "heat index:");
  RuleText stale;
  stale.background = "Hot days matter most.";
  stale.rule_statement = "Issue an alert when the heat index exceeds 0.75 and budget remains.";
  stale.state_relevance =
      "The current heat index is " + format_fixed(heat + 0.3, 2) + " with 5 alert(s) remaining.";
  CHECK(gw->judge(p, stale, 0, env).er2 == 0);

  RuleText vague;
  vague.background = "Seasoned intuition.";
  vague.rule_statement = "Generally protect the public on days that feel dangerous.";
  vague.state_relevance = "Dangerous days call for caution.";
  JudgeScores js = gw->judge(p, vague, 0, env);
  CHECK(js.er1 == 0);
  CHECK(js.er2 == 0);
  CHECK(js.er3 == 0);
}

TEST_CASE("scripted vitals rules name devices consistent with the state") {
  VitalsConfig vc;
  VitalsEnv env(vc);
  env.reset(23);
  auto gw = make_scripted_gateway();
  gw->backend().seed_episode(23);

  // Freshly reset: every device is free, so rules should assign a free one.
  PromptBundle p = gw->bundle(env);
  std::string th = gw->thought(p);
  RuleSet rs = gw->rules(p, th, env);
  REQUIRE(rs.rules.size() == 5);
  Rng rng(8);
  bool saw_assign = false;
  for (const auto& r : rs.rules) {
    if (r.rule_statement.find("free device") != std::string::npos) {
      saw_assign = true;
      const int a = gw->action(p, th, r, env, rng);
      const auto id = integer_after(r.rule_statement, "device");
      REQUIRE(id.has_value());
      CHECK(a == static_cast<int>(*id));
      JudgeScores js = gw->judge(p, r, a, env);
      CHECK(js.er1 == 1);
      CHECK(js.er2 == 1);
      CHECK(js.er3 == 1);
    }
  }
  CHECK(saw_assign);

  // Fill the ward, then rules should single out occupied devices.
  for (int t = 0; t < vc.num_devices + 2; ++t) env.step(0);
  PromptBundle p2 = gw->bundle(env);
  if (p2.state_text.find("currently free") == std::string::npos) {
    std::string th2 = gw->thought(p2);
    RuleSet rs2 = gw->rules(p2, th2, env);
    for (const auto& r : rs2.rules) {
      if (r.state_relevance.find("smallest total deviation") != std::string::npos) {
        const int a = gw->action(p2, th2, r, env, rng);
        CHECK(gw->judge(p2, r, a, env).er3 == 1);
      }
    }
  }
}

TEST_CASE("scripted candidates carry leans and select_rule picks a valid index") {
  ToyConfig tc;
  ToyEnv env(tc);
  env.reset(9);
  auto gw = make_scripted_gateway();
  gw->backend().seed_episode(9);

  PromptBundle p = gw->bundle(env);
  auto cands = gw->candidates(p, env);
  REQUIRE(cands.size() == 5);
  std::set<long long> leans;
  for (const auto& c : cands) {
    auto a = integer_after(c.substr(c.find("leaning toward")), "action");
    REQUIRE(a.has_value());
    leans.insert(*a);
  }
  CHECK(leans.size() == 5);  // one candidate per action

  std::string th = gw->thought(p);
  RuleSet rs = gw->rules(p, th, env);
  Rng rng(3);
  bool fell_back = true;
  const int k = gw->select_rule(p, th, rs, rng, &fell_back);
  CHECK_FALSE(fell_back);
  CHECK(k >= 0);
  CHECK(k < 5);
}

TEST_CASE("action_from_thought resolves the lean subject to accuracy") {
  ToyConfig tc;
  ToyEnv env(tc);
  env.reset(2);

  // Perfect accuracy: the named lean is always taken.
  ScriptedOptions exact;
  exact.thought_accuracy = 1.0;
  auto gw1 = make_scripted_gateway(exact);
  gw1->backend().seed_episode(1);
  PromptBundle p = gw1->bundle(env);
  std::string th = gw1->thought(p);
  const auto lean = integer_after(th.substr(th.find("leaning toward")), "action");
  REQUIRE(lean.has_value());
  Rng rng(5);
  for (int i = 0; i < 10; ++i)
    CHECK(gw1->action_from_thought(p, th, env, rng) == static_cast<int>(*lean));

  // 70% accuracy: off-lean actions appear at roughly the expected rate.
  ScriptedOptions noisy;
  noisy.thought_accuracy = 0.7;
  auto gw2 = make_scripted_gateway(noisy);
  int hits = 0;
  const int trials = 4000;
  gw2->backend().seed_episode(123);
  for (int i = 0; i < trials; ++i) {
    if (gw2->action_from_thought(p, th, env, rng) == static_cast<int>(*lean)) ++hits;
  }
  const double rate = static_cast<double>(hits) / trials;  // 0.7 + 0.3/5 = 0.76
  CHECK(rate > 0.71);
  CHECK(rate < 0.81);

  // Same episode seed, same draws.
  auto run = [&] {
    auto gw = make_scripted_gateway(noisy);
    gw->backend().seed_episode(77);
    std::vector<int> seq;
    Rng r2(5);
    for (int i = 0; i < 32; ++i) seq.push_back(gw->action_from_thought(p, th, env, r2));
    return seq;
  };
  CHECK(run() == run());
}

TEST_CASE("explanations cite state values and compare favors grounding") {
  HeatConfig hc;
  HeatAlertsEnv env(hc);
  env.reset(31);
  auto gw = make_scripted_gateway();
  gw->backend().seed_episode(31);

  PromptBundle p = gw->bundle(env);
  std::string th = gw->thought(p);
  RuleSet rs = gw->rules(p, th, env);
  Rng rng(6);
  const int a = gw->action(p, th, rs.rules[0], env, rng);
  std::string ex = gw->explanation(p, th, rs.rules[0], a, env);
  CHECK(ex.find("heat index") != std::string::npos);
  CHECK(ex.find(format_fixed(*number_after(p.state_text, "heat index:"), 2)) !=
        std::string::npos);

  const std::string vague_ex = "It seemed like the right call overall.";
  CHECK(gw->compare(p.task, p.state_text, ex, vague_ex) == CompareVerdict::kA);
  CHECK(gw->compare(p.task, p.state_text, vague_ex, ex) == CompareVerdict::kB);
  CHECK(gw->compare(p.task, p.state_text, ex, ex) == CompareVerdict::kTie);
}

TEST_CASE("gateway degrades cleanly on malformed or failing backends") {
  ToyConfig tc;
  ToyEnv env(tc);
  env.reset(1);
  GatewayConfig gc;
  gc.num_rules = 3;
  gc.max_retries = 1;

  SUBCASE("rule JSON that never parses is padded from env examples") {
    auto gw = Gateway(gc, std::make_shared<CannedBackend>(
                              std::vector<std::string>{"not json", "still not json"}));
    PromptBundle p = gw.bundle(env);
    RuleSet rs = gw.rules(p, "t", env);
    CHECK(rs.padded);
    CHECK(rs.rules.size() == 3);
    CHECK(gw.stats().padded_rule_sets == 1);
  }

  SUBCASE("partial rule arrays keep the valid prefix and pad the rest") {
    nlohmann::json arr = nlohmann::json::array();
    arr.push_back({{"background", "b"}, {"rule_statement", "s"}, {"state_relevance", "r"}});
    auto gw = Gateway(gc, std::make_shared<CannedBackend>(
                              std::vector<std::string>{arr.dump(), arr.dump()}));
    PromptBundle p = gw.bundle(env);
    RuleSet rs = gw.rules(p, "t", env);
    CHECK(rs.padded);
    REQUIRE(rs.rules.size() == 3);
    CHECK(rs.rules[0].background == "b");
  }

  SUBCASE("unparseable actions fall back to a random feasible one") {
    auto gw = Gateway(gc, std::make_shared<CannedBackend>(
                              std::vector<std::string>{"no numbers here"}));
    PromptBundle p = gw.bundle(env);
    Rng rng(2);
    bool fell_back = false;
    RuleText r{"b", "s", "r"};
    const int a = gw.action(p, "t", r, env, rng, &fell_back);
    CHECK(fell_back);
    CHECK(a >= 0);
    CHECK(a < tc.num_actions);
    CHECK(gw.stats().action_fallbacks == 1);
  }

  SUBCASE("judge transport failures score zero and are flagged") {
    auto gw = Gateway(gc, std::make_shared<CannedBackend>(
                              std::vector<std::string>{"<throw>"}));
    PromptBundle p = gw.bundle(env);
    RuleText r{"b", "s", "r"};
    JudgeScores js = gw.judge(p, r, 0, env);
    CHECK(js.unparsed);
    CHECK(js.rule_reward() == doctest::Approx(0.0));
    CHECK(gw.stats().judge_unparsed == 1);
  }

  SUBCASE("judge parses the two-line ER format") {
    auto gw = Gateway(gc, std::make_shared<CannedBackend>(std::vector<std::string>{
                              "ER1: yes\nER2: no", "yes"}));
    PromptBundle p = gw.bundle(env);
    RuleText r{"b", "s", "r"};
    JudgeScores js = gw.judge(p, r, 0, env);
    CHECK_FALSE(js.unparsed);
    CHECK(js.er1 == 1);
    CHECK(js.er2 == 0);
    CHECK(js.er3 == 1);
    CHECK(js.rule_reward() == doctest::Approx(2.0 / 3.0));
  }

  SUBCASE("compare disagreement across orderings resolves to a tie") {
    // First call says A, second also says A (which means B after unswapping).
    auto gw = Gateway(gc, std::make_shared<CannedBackend>(
                              std::vector<std::string>{"A", "A"}));
    CHECK(gw.compare("t", "s", "x", "y") == CompareVerdict::kTie);
  }
}

TEST_CASE("hash embedder is deterministic, unit norm, and cached") {
  EmbeddingConfig ec;
  ec.provider = "hash";
  ec.dim = 64;
  ec.cache_capacity = 8;
  auto emb = make_embedder(ec);
  REQUIRE(emb->dim() == 64);
  Vec a = emb->embed("Prioritize assigning free device 2.");
  Vec b = emb->embed("Prioritize assigning free device 2.");
  Vec c = emb->embed("Choose device 4, which has been worn longest.");
  CHECK((a - b).norm() == doctest::Approx(0.0));
  CHECK(a.norm() == doctest::Approx(1.0));
  CHECK((a - c).norm() > 0.1);
}

TEST_CASE("remote backend speaks the chat and embeddings wire formats") {
  httplib::Server server;
  std::atomic<int> chat_calls{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++chat_calls;
    if (chat_calls == 1) {  // first attempt fails; the client must retry
      res.status = 500;
      return;
    }
    auto body = nlohmann::json::parse(req.body);
    nlohmann::json out;
    out["choices"] = nlohmann::json::array();
    nlohmann::json choice;
    choice["message"] = {{"role", "assistant"},
                         {"content", "echo: " + body["messages"][0]["content"].get<std::string>() +
                                         "|auth=" + req.get_header_value("Authorization")}};
    out["choices"].push_back(choice);
    res.set_content(out.dump(), "application/json");
  });
  server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    nlohmann::json out;
    std::vector<double> v(8, 0.0);
    const std::string text = body["input"][0].get<std::string>();
    for (size_t i = 0; i < text.size(); ++i) v[i % 8] += static_cast<double>(text[i]);
    out["data"] = nlohmann::json::array({nlohmann::json{{"embedding", v}, {"index", 0}}});
    res.set_content(out.dump(), "application/json");
  });

  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread st([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  setenv("RBRL_TEST_KEY", "sk-test-123", 1);
  RemoteLlmConfig rc;
  rc.endpoint = "http://127.0.0.1:" + std::to_string(port);
  rc.api_key_env = "RBRL_TEST_KEY";
  rc.max_retries = 2;
  rc.timeout_sec = 5.0;
  auto backend = make_remote_backend(rc);
  CompletionRequest req;
  req.prompt = "ping";
  const std::string reply = backend->complete(req);
  CHECK(reply == "echo: ping|auth=Bearer sk-test-123");
  CHECK(chat_calls == 2);

  EmbeddingConfig ec;
  ec.provider = "remote";
  ec.dim = 8;
  ec.endpoint = rc.endpoint;
  ec.api_key_env = "RBRL_TEST_KEY";
  ec.max_retries = 1;
  auto emb = make_embedder(ec);
  Vec v = emb->embed("abc");
  CHECK(v.size() == 8);
  CHECK(v.sum() == doctest::Approx('a' + 'b' + 'c'));

  server.stop();
  st.join();
}
