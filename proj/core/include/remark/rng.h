#ifndef REMARK_RNG_H_
#define REMARK_RNG_H_

#include <cstddef>
#include <cstdint>
#include <random>

namespace remark {

// Seeded random stream.
//
// Every draw is derived from raw mt19937_64 output with explicit
// arithmetic, so a given seed produces the same sequence under every
// standard library (std::*_distribution makes no such promise).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform in (0, 1); never returns 0.
  double uniform_open();
  bool bernoulli(double p) { return uniform() < p; }
  // Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);
  // Standard Gumbel(0, 1) sample.
  double gumbel();
  // Standard normal sample (Box-Muller, no cached spare).
  double normal();

  // Derives an independent child stream; advances this stream by one draw.
  Rng split() { return Rng(mix(next_u64())); }

  // SplitMix64 finalizer, used to derive per-item seeds.
  static std::uint64_t mix(std::uint64_t x);
  // Seed for item `index` of a stream rooted at `seed`.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
    return mix(seed ^ mix(index + 0x9e3779b97f4a7c15ULL));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace remark

#endif  // REMARK_RNG_H_
