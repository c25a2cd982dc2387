#pragma once

#include <cstdint>

namespace ebf {

/// Counter-based generator: the k-th draw of stream `seed` is
/// splitmix64(seed, k), so any draw is reproducible from (seed, k) alone.
/// Gaussian variates use the Box-Muller transform on pairs of uniforms.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

  std::uint64_t next_u64() noexcept;
  /// Uniform on (0, 1), 53 bits of resolution, never 0 or 1.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; the sine branch is cached.
  double normal() noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

  /// Deterministic sub-stream seed, e.g. one per Monte-Carlo trial.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ebf
