#include "ebf/rng.hpp"

#include <cmath>
#include <numbers>

namespace ebf {

namespace {

std::uint64_t mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace

std::uint64_t CounterRng::next_u64() noexcept {
  ++counter_;
  return mix(mix(seed_) + counter_ * kGolden);
}

double CounterRng::uniform() noexcept {
  // (k + 0.5) / 2^53 for k in [0, 2^53)
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t CounterRng::derive(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix(seed ^ mix(stream + kGolden));
}

}  // namespace ebf
