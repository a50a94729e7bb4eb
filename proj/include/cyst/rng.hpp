#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace cyst {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Deterministic random source. All randomness in the library (parameter
// init, batch shuffling, corpus generation) flows through one of these, so
// a fixed seed reproduces a run exactly. Distribution code is hand-rolled
// rather than taken from <random> because the standard distributions are
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n). n must be positive.
  std::size_t below(std::size_t n) {
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t rem = (UINT64_MAX % un + 1) % un;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (rem == 0 || r < static_cast<std::uint64_t>(0) - rem) {
        return static_cast<std::size_t>(r % un);
      }
    }
  }

  // Fisher–Yates with this generator; independent of std::shuffle's
  // unspecified consumption order.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // Derive an independent stream, e.g. one per training concern.
  Rng fork(std::uint64_t salt) { return Rng(splitmix64(next_u64() ^ splitmix64(salt))); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace cyst
