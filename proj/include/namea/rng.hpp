#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace namea {

std::uint64_t fnv1a64(std::string_view text);

/// Seeded generator. Every stochastic component draws from its own named
/// substream so that switching one component off leaves the others' draws
/// unchanged.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Independent stream derived from (seed, name).
  static Rng substream(std::uint64_t seed, std::string_view name);

  float normal() { return normal_(engine_); }
  double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }
  bool bernoulli(double p) { return uniform01() < p; }
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<float> normal_{0.0f, 1.0f};
};

}  // namespace namea
