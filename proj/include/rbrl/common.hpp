#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace rbrl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// splitmix64; used to derive independent seed streams from (seed, stream ids).
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
  return mix64(mix64(mix64(mix64(seed) ^ a) ^ b) ^ c);
}

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  void seed(uint64_t s) { engine_.seed(s); }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  // inclusive bounds
  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

  std::string serialize() const;
  void deserialize(const std::string& s);

 private:
  std::mt19937_64 engine_;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rbrl
