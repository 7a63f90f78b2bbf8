#pragma once

// Splittable random streams for reproducible, worker-count-independent Monte
// Carlo: each (seed, stream_index) pair deterministically derives an
// independent xoshiro256++ state through SplitMix64 mixing, so trials can be
// assigned to any number of threads without changing the drawn numbers.

#include <cmath>
#include <cstdint>

namespace isac {

namespace detail {

struct SplitMix64 {
  uint64_t state;
  explicit SplitMix64(uint64_t s) : state(s) {}
  uint64_t next() {
    uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
};

inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

} // namespace detail

class Rng {
 public:
  // Derive the stream for a given (seed, stream index) pair.
  Rng(uint64_t seed, uint64_t stream) {
    detail::SplitMix64 mix(seed ^ (0x6A09E667F3BCC909ull + stream * 0xD1B54A32D192ED03ull));
    for (auto& word : s_) word = mix.next();
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // all-zero state is invalid
  }

  uint64_t next_u64() {
    const uint64_t result = detail::rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = detail::rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Exp(1) via inversion; finite for all draws.
  double exponential() { return -std::log1p(-uniform()); }

 private:
  uint64_t s_[4];
};

} // namespace isac
