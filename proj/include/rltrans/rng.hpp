#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace rltrans {

// Derives an independent sub-seed from a master seed and a stream index
// (splitmix64 on the xor). Parallel trials use mix_seed(seed, trial).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Deterministic pseudo-random source. Every sampling operation in the
/// library draws from an explicitly seeded Rng so runs are reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform double in [0, 1).
  double uniform();

  // Inverse-CDF sample over nonnegative weights; the weights need not be
  // normalized. Returns the last index with positive weight when rounding
  // pushes u past the total.
  int sample(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

}  // namespace rltrans
