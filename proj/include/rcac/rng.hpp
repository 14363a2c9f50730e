#pragma once

#include <cstdint>
#include <random>

namespace rcac {

// splitmix64; used to derive independent stream seeds from a run seed.
inline uint64_t mix_seed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream * 0x9e3779b97f4a7c15ull + 1));
}

// Named stream ids so every consumer of randomness draws from its own
// deterministic sequence. Keeping task/curious streams separate leaves the
// task-side trace unchanged until the first curious action is taken.
enum class Stream : uint64_t {
  ParamInit = 1,
  EnvReset = 2,
  PolicySelect = 3,
  TaskAction = 4,
  CuriousAction = 5,
  ReplaySample = 6,
  Pretrain = 7,
  TaskUpdate = 8,
  CuriousUpdate = 9,
  Eval = 10,
};

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}
  Rng(uint64_t seed, Stream stream) : gen_(derive_seed(seed, static_cast<uint64_t>(stream))) {}

  // [0, 1)
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  // inclusive bounds
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return std::uniform_int_distribution<int64_t>(lo, hi)(gen_);
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace rcac
