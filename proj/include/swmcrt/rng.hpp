#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <utility>

namespace swmcrt {

// Every random quantity in the library is drawn from a stream keyed by a
// tuple of integers (master seed, replicate, test, resample, ...).  Results
// therefore never depend on scheduling or thread count.

inline constexpr std::uint64_t default_seed = 20220817;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for the stream identified by (seed, keys...).
inline constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                           std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = splitmix64(seed ^ 0x5851f42d4c957f2dULL);
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x14057b7ef767814fULL));
  return h;
}

// Small counter-based generator; cheap enough to instantiate per resample.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// Unbiased integer in [0, n) (Lemire's multiply-and-reject).
template <class Gen>
std::uint64_t uniform_below(Gen& gen, std::uint64_t n) {
  static_assert(Gen::min() == 0 && Gen::max() == std::numeric_limits<std::uint64_t>::max());
  unsigned __int128 m = static_cast<unsigned __int128>(gen()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(gen()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

// Uniform double in [0, 1) with 53 random bits.
template <class Gen>
double uniform01(Gen& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Fisher-Yates over the first `k` positions of [first, last).
template <class It, class Gen>
void partial_shuffle(It first, It last, std::size_t k, Gen& gen) {
  const auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_below(gen, n - i));
    using std::swap;
    swap(first[i], first[j]);
  }
}

template <class It, class Gen>
void shuffle(It first, It last, Gen& gen) {
  partial_shuffle(first, last, static_cast<std::size_t>(last - first), gen);
}

// Standard normal via Marsaglia's polar method.
template <class Gen>
double standard_normal(Gen& gen) {
  for (;;) {
    const double u = 2.0 * uniform01(gen) - 1.0;
    const double v = 2.0 * uniform01(gen) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

}  // namespace swmcrt
