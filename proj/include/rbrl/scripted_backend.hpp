#pragma once

// Deterministic stand-in for a hosted language model. Every reply is a pure
// function of the prompt text, the per-episode seed, and the static options,
// so full runs are reproducible offline and in CI. The backend understands
// the project's own prompt templates: it locates the labeled sections,
// recognizes which kind of reply is being requested, parses the rendered
// environment state back out of the prompt, and answers from small libraries
// of domain heuristics. Judging replies apply fixed textual criteria
// (actionability, agreement of cited facts with the state, consistency of
// the taken action with the rule) rather than consulting any hidden flag.

#include "rbrl/common.hpp"
#include "rbrl/gateway.hpp"

#include <cstdint>
#include <string>

namespace rbrl {

struct ScriptedOptions {
  // "distinct": ring-world rules cover different offsets (they disagree on
  // the action). "paired": all rules imply the same action but alternate
  // between a precise form and a vague form, which separates the judge's
  // scores from the environment return.
  std::string toy_rules = "distinct";
  // Offset the backend leans toward when reasoning free-form about the ring
  // world (its "domain intuition"); harnesses set it to the world's true
  // offset when they want the intuition to be right.
  int toy_offset_hint = 2;
  // Probability that a free-form analysis is resolved into the action it
  // names; otherwise a uniformly random action is taken. Rule-conditioned
  // requests are exempt: an explicit rule is applied deterministically.
  double thought_accuracy = 0.7;

  void validate() const;
};

class ScriptedBackend : public LlmBackend {
 public:
  explicit ScriptedBackend(ScriptedOptions opts = {}, uint64_t seed = 0);

  std::string complete(const CompletionRequest& req) override;
  void seed_episode(uint64_t seed) override;
  std::string name() const override { return "scripted"; }

 private:
  ScriptedOptions opts_;
  Rng rng_;
};

}  // namespace rbrl
