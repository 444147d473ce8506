// Splittable deterministic random generator.
//
// Every random decision in the library flows from a single 64-bit seed
// through this generator so that runs are reproducible bit-for-bit and the
// sampling order can be replicated outside C++. The generator is SplitMix64;
// child streams are derived by remixing the parent state with an odd
// stream-dependent constant. Not suitable for cryptography.

#pragma once

#include <cmath>
#include <cstdint>

namespace chroma {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Child generator for an independent, reproducible stream. Splitting does
  // not advance the parent.
  Rng split(std::uint64_t stream) const {
    return Rng(mix(state_ + 0x9E3779B97F4A7C15ULL * (2 * stream + 1)));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  // Uniform in [0, 1), 53 mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; one variate per call, no cached state.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace chroma
