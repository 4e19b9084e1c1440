#pragma once

// Bit-exact binary checkpoints: a named bag of tensors, strings (serialized
// RNG streams), and integer counters, plus helpers that capture and restore
// a full SAC trainer (networks, targets, Adam moments, temperature, step
// count, dropout streams).

#include "rbrl/common.hpp"
#include "rbrl/sac.hpp"

#include <map>
#include <string>

namespace rbrl {

struct Checkpoint {
  std::map<std::string, Mat> tensors;
  std::map<std::string, std::string> strings;
  std::map<std::string, long long> counters;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

void capture_adam(const std::string& key, Adam& opt, Checkpoint& ckpt);
void restore_adam(const std::string& key, Adam& opt, const Checkpoint& ckpt);

void capture_trainer(const std::string& prefix, SacTrainer& trainer, Checkpoint& ckpt);
void restore_trainer(const std::string& prefix, SacTrainer& trainer, const Checkpoint& ckpt);

}  // namespace rbrl
