#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace clab {

// Deterministic random stream. std::mt19937_64 is fully specified by the
// standard, so sequences are reproducible across platforms; the standard
// *distributions* are not, which is why the draw helpers below are
// hand-rolled.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double u01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be > 0.
  /// Multiply-shift bounding; bias is O(n / 2^64), negligible here.
  std::uint64_t bounded(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  double exponential(double mean) {
    // 1 - u01() is in (0, 1], so the log is finite.
    return -mean * std::log(1.0 - u01());
  }

  bool bernoulli(double p) { return u01() < p; }

  /// Derive an independent stream. Streams with distinct salts are
  /// statistically disjoint; same (seed, salt) -> same stream.
  static Rng stream(std::uint64_t seed, std::uint64_t salt) {
    return Rng(mix(seed) ^ mix(salt * 0x9e3779b97f4a7c15ULL + 1));
  }

 private:
  // splitmix64 finalizer; spreads low-entropy seeds over the state space.
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
};

}  // namespace clab
