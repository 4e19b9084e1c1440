#include "rbrl/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <vector>

namespace rbrl {

namespace {

constexpr uint64_t kMagic = 0x31544b4b43524252ull;  // "RBRCKKT1"
constexpr uint32_t kVersion = 1;

struct Writer {
  FILE* f;
  void u32(uint32_t x) { std::fwrite(&x, sizeof(x), 1, f); }
  void u64(uint64_t x) { std::fwrite(&x, sizeof(x), 1, f); }
  void i64(int64_t x) { std::fwrite(&x, sizeof(x), 1, f); }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    std::fwrite(s.data(), 1, s.size(), f);
  }
  void mat(const Mat& m) {
    u32(static_cast<uint32_t>(m.rows()));
    u32(static_cast<uint32_t>(m.cols()));
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) {
        const double v = m(r, c);
        std::fwrite(&v, sizeof(v), 1, f);
      }
  }
};

struct Reader {
  FILE* f;
  bool ok = true;
  uint32_t u32() {
    uint32_t x = 0;
    ok = ok && std::fread(&x, sizeof(x), 1, f) == 1;
    return x;
  }
  uint64_t u64() {
    uint64_t x = 0;
    ok = ok && std::fread(&x, sizeof(x), 1, f) == 1;
    return x;
  }
  int64_t i64() {
    int64_t x = 0;
    ok = ok && std::fread(&x, sizeof(x), 1, f) == 1;
    return x;
  }
  std::string str() {
    const uint32_t n = u32();
    std::string s(n, '\0');
    if (n) ok = ok && std::fread(s.data(), 1, n, f) == n;
    return s;
  }
  Mat mat() {
    const uint32_t rows = u32();
    const uint32_t cols = u32();
    Mat m(rows, cols);
    for (uint32_t r = 0; r < rows && ok; ++r)
      for (uint32_t c = 0; c < cols && ok; ++c) {
        double v = 0.0;
        ok = ok && std::fread(&v, sizeof(v), 1, f) == 1;
        m(r, c) = v;
      }
    return m;
  }
};

}  // namespace

void Checkpoint::save(const std::string& path) const {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ConfigError("checkpoint: cannot open for writing: " + path);
  Writer w{f};
  w.u64(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    w.str(name);
    w.mat(m);
  }
  w.u32(static_cast<uint32_t>(strings.size()));
  for (const auto& [name, s] : strings) {
    w.str(name);
    w.str(s);
  }
  w.u32(static_cast<uint32_t>(counters.size()));
  for (const auto& [name, v] : counters) {
    w.str(name);
    w.i64(v);
  }
  std::fclose(f);
}

Checkpoint Checkpoint::load(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw ConfigError("checkpoint: cannot open: " + path);
  Reader r{f};
  Checkpoint c;
  if (r.u64() != kMagic) {
    std::fclose(f);
    throw ConfigError("checkpoint: bad magic in " + path);
  }
  const uint32_t version = r.u32();
  if (version != kVersion) {
    std::fclose(f);
    throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
  }
  const uint32_t nt = r.u32();
  for (uint32_t i = 0; i < nt && r.ok; ++i) {
    std::string name = r.str();
    c.tensors[name] = r.mat();
  }
  const uint32_t ns = r.u32();
  for (uint32_t i = 0; i < ns && r.ok; ++i) {
    std::string name = r.str();
    c.strings[name] = r.str();
  }
  const uint32_t nc = r.u32();
  for (uint32_t i = 0; i < nc && r.ok; ++i) {
    std::string name = r.str();
    c.counters[name] = r.i64();
  }
  std::fclose(f);
  if (!r.ok) throw ConfigError("checkpoint: truncated file " + path);
  return c;
}

void capture_adam(const std::string& key, Adam& opt, Checkpoint& ckpt) {
  ckpt.counters[key + ".t"] = opt.t();
  const auto& slots = opt.slots();
  for (size_t i = 0; i < slots.size(); ++i) {
    ckpt.tensors[key + ".m" + std::to_string(i)] = slots[i].m;
    ckpt.tensors[key + ".v" + std::to_string(i)] = slots[i].v;
  }
}

void restore_adam(const std::string& key, Adam& opt, const Checkpoint& ckpt) {
  auto t = ckpt.counters.find(key + ".t");
  if (t == ckpt.counters.end()) throw ConfigError("checkpoint: missing " + key + ".t");
  opt.set_t(t->second);
  auto& slots = opt.slots();
  for (size_t i = 0; i < slots.size(); ++i) {
    auto m = ckpt.tensors.find(key + ".m" + std::to_string(i));
    auto v = ckpt.tensors.find(key + ".v" + std::to_string(i));
    if (m == ckpt.tensors.end() || v == ckpt.tensors.end())
      throw ConfigError("checkpoint: missing Adam slots for " + key);
    slots[i].m = m->second;
    slots[i].v = v->second;
  }
}

void capture_trainer(const std::string& prefix, SacTrainer& trainer, Checkpoint& ckpt) {
  trainer.visit([&](Param& p) { ckpt.tensors[prefix + p.name] = p.w; });
  capture_adam(prefix + "adam.actor", trainer.actor_opt(), ckpt);
  capture_adam(prefix + "adam.q", trainer.q_opt(), ckpt);
  capture_adam(prefix + "adam.alpha", trainer.alpha_opt(), ckpt);
  ckpt.counters[prefix + "steps"] = trainer.steps();
  ckpt.strings[prefix + "rng.actor"] = trainer.actor().dropout_rng().serialize();
  ckpt.strings[prefix + "rng.q1"] = trainer.q1().dropout_rng().serialize();
  ckpt.strings[prefix + "rng.q2"] = trainer.q2().dropout_rng().serialize();
}

void restore_trainer(const std::string& prefix, SacTrainer& trainer, const Checkpoint& ckpt) {
  trainer.visit([&](Param& p) {
    auto it = ckpt.tensors.find(prefix + p.name);
    if (it == ckpt.tensors.end())
      throw ConfigError("checkpoint: missing tensor " + prefix + p.name);
    if (it->second.rows() != p.w.rows() || it->second.cols() != p.w.cols())
      throw ConfigError("checkpoint: shape mismatch for " + prefix + p.name);
    p.w = it->second;
    p.g.setZero();
  });
  restore_adam(prefix + "adam.actor", trainer.actor_opt(), ckpt);
  restore_adam(prefix + "adam.q", trainer.q_opt(), ckpt);
  restore_adam(prefix + "adam.alpha", trainer.alpha_opt(), ckpt);
  auto steps = ckpt.counters.find(prefix + "steps");
  if (steps != ckpt.counters.end()) trainer.set_steps(steps->second);
  auto rng = ckpt.strings.find(prefix + "rng.actor");
  if (rng != ckpt.strings.end()) trainer.actor().dropout_rng().deserialize(rng->second);
  rng = ckpt.strings.find(prefix + "rng.q1");
  if (rng != ckpt.strings.end()) trainer.q1().dropout_rng().deserialize(rng->second);
  rng = ckpt.strings.find(prefix + "rng.q2");
  if (rng != ckpt.strings.end()) trainer.q2().dropout_rng().deserialize(rng->second);
}

}  // namespace rbrl
