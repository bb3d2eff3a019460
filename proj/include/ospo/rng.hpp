#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace ospo {

// Deterministic randomness helpers. std::mt19937_64 is the engine, but the
// standard distribution classes and std::shuffle are implementation-defined,
// so every draw that ends up in a frozen test value or an output file goes
// through the methods below instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t r = engine_();
    while (r >= limit) r = engine_();
    return r % n;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Stable sub-seed derivation: independent streams for (seed, tag, index).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag,
                              std::uint64_t index) {
    return splitmix64(splitmix64(seed ^ (tag * 0x9e3779b97f4a7c15ULL)) ^
                      (index * 0xbf58476d1ce4e5b9ULL));
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ospo
