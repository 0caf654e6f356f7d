#pragma once

// Counter-based random numbers. Every draw is a pure function of a key
// (derived from the master seed and a path of stream ids) and a counter, so
// results do not depend on evaluation order or on how work is split across
// threads.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

namespace chiplet {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Folds a sequence of stream ids into a key.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t k = mix64(seed ^ 0x6a09e667f3bcc908ULL);
  for (std::uint64_t p : path) {
    k = mix64(k ^ mix64(p + 0x3c6ef372fe94f82bULL));
  }
  return k;
}

// Stream tags keep unrelated consumers of one master seed apart.
namespace stream {
inline constexpr std::uint64_t kFrequency = 0x4652455100000001ULL;
inline constexpr std::uint64_t kNoise = 0x4e4f495300000002ULL;
inline constexpr std::uint64_t kLink = 0x4c494e4b00000003ULL;
inline constexpr std::uint64_t kShuffle = 0x5348554600000004ULL;
inline constexpr std::uint64_t kChipletBatch = 0x4348495000000005ULL;
inline constexpr std::uint64_t kMonoBatch = 0x4d4f4e4f00000006ULL;
inline constexpr std::uint64_t kCircuit = 0x4349524300000007ULL;
inline constexpr std::uint64_t kSynth = 0x53594e5400000008ULL;
inline constexpr std::uint64_t kAssembly = 0x4153534d00000009ULL;
}  // namespace stream

/// Where a device's randomness came from: the master seed and the stream path.
struct SeedLineage {
  std::uint64_t master = 0;
  std::vector<std::uint64_t> path;

  bool operator==(const SeedLineage&) const = default;
};

class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}
  CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept
      : key_(derive_key(seed, path)) {}

  constexpr std::uint64_t next_u64() noexcept { return mix64(key_ ^ mix64(counter_++)); }

  /// Uniform on the open interval (0, 1), 53 bits.
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound) by rejection; bound > 0.
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = bound * (~std::uint64_t{0} / bound);
    std::uint64_t x = next_u64();
    while (x >= limit) {
      x = next_u64();
    }
    return x % bound;
  }

  /// Standard normal via Box-Muller (one variate per two uniforms).
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Fisher-Yates shuffle; deterministic across standard libraries.
  template <typename T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  constexpr std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace chiplet
