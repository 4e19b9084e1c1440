#pragma once

// Log replay: re-runs the language and environment sides of a recorded
// training run from its logged seeds and verifies every recorded artifact
// (state text, thoughts, rules, actions, judge scores, rewards, episode
// summaries) against the regenerated ones.

#include "rbrl/run_config.hpp"

#include <iosfwd>
#include <string>

namespace rbrl {

struct ReplayResult {
  long long workers = 0;
  long long steps = 0;
  long long episodes = 0;
  long long generations = 0;  // backend-produced artifacts re-verified
  long long mismatches = 0;

  bool ok() const { return mismatches == 0; }
};

// `err` receives one line per mismatch (up to max_printed); pass nullptr to
// silence. Throws ConfigError when the log cannot be read or its header
// names a different environment, backend, or prompt-template set than `cfg`.
ReplayResult replay_log(const RunConfig& cfg, const std::string& log_path, std::ostream* err,
                        long long max_printed = 10);

}  // namespace rbrl
