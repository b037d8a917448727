#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace uqa {

std::uint64_t fnv1a64(std::string_view text);

// splitmix64 finalizer over the combined pair.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

std::string sha256_hex(std::string_view text);

/// Seeded generator whose outputs depend only on the mt19937_64 bit stream,
/// so draws are identical across standard library implementations (the
/// <random> distribution adaptors are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (no cached second draw).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace uqa
