#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace mcd {

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Seed for an independent stream keyed by (seed, index). Used wherever
// results must not depend on iteration order or parallel partitioning.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  std::uint64_t s = seed ^ (index * 0xD1B54A32D192ED03ULL);
  splitmix64(s);
  return splitmix64(s);
}

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xCBF29CE484222325ULL) noexcept {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Child seed for a named component of an experiment.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept {
  return stream_seed(seed, fnv1a64(label));
}

// Small counter-seeded engine satisfying UniformRandomBitGenerator; cheap to
// construct per element.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept { return splitmix64(state_); }

 private:
  std::uint64_t state_;
};

}  // namespace mcd
