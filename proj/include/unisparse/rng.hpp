#pragma once

#include <cmath>
#include <cstdint>

namespace unisparse {

// SplitMix64. Output i is a pure function of (stream seed, i), which makes
// every stream counter-based: slices generated in any order and in parallel
// agree bit for bit with sequential generation.
constexpr std::uint64_t kSplitMixGamma = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Order-sensitive fold of one tag into a stream seed.
constexpr std::uint64_t chain_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix64(seed + kSplitMixGamma + tag);
}

constexpr std::uint64_t chain_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return chain_seed(chain_seed(seed, a), b);
}

constexpr std::uint64_t chain_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                   std::uint64_t c) {
  return chain_seed(chain_seed(seed, a, b), c);
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t stream_seed) : state_(stream_seed) {}

  std::uint64_t next_u64() {
    state_ += kSplitMixGamma;
    return mix64(state_);
  }

  // Uniform in [0, 1).
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log argument.
  double next_double_open() { return double((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // Standard normal via Box-Muller; the pair's second value is cached.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_double_open();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace unisparse
