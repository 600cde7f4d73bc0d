#pragma once
#include <cstdint>

namespace cafqa {

// Deterministic, platform-independent RNG. std::uniform_real_distribution is
// implementation-defined, so bit mixing is done by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound).
  std::uint64_t next_below(std::uint64_t bound) {
    return next_u64() % bound;
  }

  /// +1 or -1 with equal probability.
  int rademacher() { return (next_u64() & 1) ? 1 : -1; }

 private:
  std::uint64_t state_;
};

/// Derives an independent stream seed from a master seed and stream indices.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0) {
  Rng r(master ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xc2b2ae3d27d4eb4fULL));
  r.next_u64();
  return r.next_u64();
}

}  // namespace cafqa
