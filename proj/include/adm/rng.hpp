#pragma once

#include <cstdint>
#include <random>

namespace adm {

// Seeded random stream with a documented substream rule so simulations are
// reproducible bit for bit. All derived quantities (uniform doubles, bounded
// ints) are computed here from raw 64-bit draws rather than through
// std::uniform_*_distribution, whose output is implementation defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(mix(seed)) {}

  // Substream for run `index` under `master_seed`. Index 0 is reserved by the
  // experiment layer for population/init draws; Monte Carlo run m uses m+1.
  static RngStream substream(std::uint64_t master_seed, std::uint64_t index) {
    return RngStream(master_seed + (index + 1) * 0x9E3779B97F4A7C15ull);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  bool next_bernoulli(double prob) { return next_double() < prob; }

  // Uniform on {0, ..., bound-1} via rejection (no modulo bias).
  std::uint64_t next_index(std::uint64_t bound) {
    const std::uint64_t max64 = ~0ull;
    const std::uint64_t rem = (max64 % bound + 1) % bound;  // 2^64 mod bound
    for (;;) {
      std::uint64_t r = engine_();
      if (rem == 0 || r <= max64 - rem) return r % bound;
    }
  }

 private:
  // splitmix64 finalizer; decorrelates consecutive seeds.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
};

}  // namespace adm
