#include "rbrl/env.hpp"

#include "rbrl/text.hpp"

#include <cctype>

namespace rbrl {

void EnvSpec::validate() const {
  if (id.empty()) throw ConfigError("env: id must be set");
  if (state_dim <= 0) throw ConfigError("env: state_dim must be positive");
  if (num_actions <= 0) throw ConfigError("env: num_actions must be positive");
  if (max_episode_steps <= 0) throw ConfigError("env: max_episode_steps must be positive");
  if (discount < 0.0 || discount > 1.0) throw ConfigError("env: discount must lie in [0, 1]");
}

std::optional<int> Environment::parse_action(const std::string& text) const {
  const int n = spec().num_actions;
  auto in_range = [n](long long v) { return v >= 0 && v < n; };

  // Pass 1: structured keys. Scan every occurrence of every key and keep the
  // last in-range integer that directly follows one; models that restate
  // their reasoning put the final answer last.
  std::string lower = to_lower(text);
  std::optional<int> keyed;
  for (const auto& key : parse_keys()) {
    const std::string k = to_lower(key);
    size_t pos = 0;
    while ((pos = lower.find(k, pos)) != std::string::npos) {
      auto ints = extract_integers(text.substr(pos + k.size(), 24));
      if (!ints.empty() && in_range(ints.front())) keyed = static_cast<int>(ints.front());
      pos += k.size();
    }
  }
  if (keyed) return keyed;

  // Pass 2: a unique in-range bare integer.
  std::optional<long long> unique;
  bool ambiguous = false;
  for (long long v : extract_integers(text)) {
    if (!in_range(v)) continue;
    if (!unique) {
      unique = v;
    } else if (*unique != v) {
      ambiguous = true;
    }
  }
  if (unique && !ambiguous) return static_cast<int>(*unique);
  return std::nullopt;
}

}  // namespace rbrl
