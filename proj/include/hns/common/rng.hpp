#pragma once

#include <cmath>
#include <cstdint>

namespace hns {

// PCG32: small, fast, serializable (two u64 words), identical output on every
// platform. std:: distributions are implementation-defined, so all sampling
// helpers are hand-rolled here.
class Rng {
 public:
  Rng() : Rng(0x853c49e6748fea9bULL) {}
  explicit Rng(uint64_t seed, uint64_t stream = 0) { reseed(seed, stream); }

  void reseed(uint64_t seed, uint64_t stream = 0) {
    state_ = 0;
    inc_ = (stream << 1u) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  uint32_t next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  uint64_t next_u64() {
    return (static_cast<uint64_t>(next_u32()) << 32) | next_u32();
  }

  // [0, 1)
  double uniform() { return next_u32() * (1.0 / 4294967296.0); }
  float uniform_f() { return static_cast<float>(uniform()); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int randint(int n) {
    return n <= 0 ? 0 : static_cast<int>(uniform() * n) % n;
  }

  int randint(int lo, int hi_inclusive) {
    return lo + randint(hi_inclusive - lo + 1);
  }

  bool chance(double p) { return uniform() < p; }

  double normal() {
    // Box-Muller, one value per call; cheap enough at these scales.
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 1e-12);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  float normal_f() { return static_cast<float>(normal()); }

  // Independent child stream; used to give each worker/episode its own rng.
  Rng fork(uint64_t stream) const {
    return Rng(state_ ^ 0x9e3779b97f4a7c15ULL, stream);
  }

  uint64_t state() const { return state_; }
  uint64_t inc() const { return inc_; }
  void restore(uint64_t state, uint64_t inc) {
    state_ = state;
    inc_ = inc;
  }

 private:
  uint64_t state_ = 0;
  uint64_t inc_ = 1;
};

inline uint64_t hash_combine(uint64_t h, uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 12) + (h >> 4);
  return h;
}

}  // namespace hns
