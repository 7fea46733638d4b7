#pragma once

/// \file rng.hpp
/// \brief Seeded generator used for every Monte-Carlo check.
///
/// SplitMix64 keeps a single 64-bit state word; the derived uniform and normal
/// draws are computed here so results do not depend on the standard library's
/// distribution implementations.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace reslab {

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0x5eed) : state_(seed) {}

  std::uint64_t next_u64() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Index in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept { return n == 0 ? 0 : next_u64() % n; }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace reslab
