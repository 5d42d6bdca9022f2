#pragma once

#include <cstdint>
#include <random>

namespace nis {

// splitmix64; used to derive independent stream seeds from a root seed.
std::uint64_t mix_seed(std::uint64_t root, std::uint64_t salt);

// Deterministic random stream. All distributions are implemented by hand on
// top of mt19937_64 so that sequences are bit-identical across platforms
// (std::*_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased uniform integer in [0, n); n > 0.
  std::int64_t uniform_int(std::int64_t n);

  // Standard normal via Box-Muller (one value per call; no caching).
  double normal();

  // Derive an independent child stream. Children depend on the construction
  // seed and the salt only, never on how much this stream has been consumed.
  Rng stream(std::uint64_t salt) const { return Rng(mix_seed(seed_, salt)); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

}  // namespace nis
