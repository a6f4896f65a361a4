#pragma once

#include <cmath>
#include <cstdint>

namespace pnn {

// Counter-based uniform source: every draw is a pure function of
// (seed, counter, lane), so two consumers holding the same seed see the
// same numbers regardless of how many draws each one has made.  Mixing is
// the SplitMix64 finalizer applied twice.
class KeyedRandom {
 public:
  explicit KeyedRandom(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits(std::uint64_t counter, std::uint32_t lane) const {
    std::uint64_t key = mix(seed_ ^ (0xD1B54A32D192ED03ULL * (lane + 1)));
    return mix(key + 0x9E3779B97F4A7C15ULL * (counter + 1));
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter, std::uint32_t lane) const {
    return static_cast<double>(bits(counter, lane) >> 11) * 0x1.0p-53;
  }

  // Exp(rate) by inversion; 1 - u lies in (0, 1] so the log is finite.
  double exponential(std::uint64_t counter, std::uint32_t lane, double rate) const {
    return -std::log1p(-uniform(counter, lane)) / rate;
  }

  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t seed_;
};

// Derive an independent seed for replication `index` of a run seeded with `seed`.
inline std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t index) {
  return KeyedRandom::mix(KeyedRandom::mix(seed) ^ (index * 0xA0761D6478BD642FULL + 1));
}

}  // namespace pnn
