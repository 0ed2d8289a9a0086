#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace ssf {

/// SplitMix64 step: advances `state` and returns the next output.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Derives an independent seed for substream `stream` of `seed`.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// FNV-1a over bytes; used to key parameter init streams by name.
std::uint64_t fnv1a(std::string_view text) noexcept;

/// xoshiro256** generator whose 256-bit state is filled from SplitMix64(seed).
///
/// All derived draws are defined here so a seed reproduces the same stream
/// on every platform: uniform() takes the top 53 bits, normal() is
/// Box-Muller over two uniforms (the second value is cached), below() uses
/// rejection on the largest multiple of n.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;
  double normal() noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }

  template <class U>
  void shuffle(std::span<U> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t s_[4];
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace ssf
