#pragma once

#include <cstdint>
#include <limits>

namespace plr {

/// One step of the SplitMix64 output function applied to `state + golden`.
/// `splitmix64(seed)` is the first value of the stream seeded with `seed`.
constexpr uint64_t splitmix64(uint64_t seed) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// SplitMix64 stream. All randomness in the library goes through this type
/// (never through <random> distributions, whose outputs are not portable), so
/// identical seeds give identical results on every platform.
class Rng {
 public:
  using result_type = uint64_t;

  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<uint64_t>::max(); }

  result_type operator()() {
    const uint64_t out = splitmix64(state_);
    state_ += 0x9e3779b97f4a7c15ULL;
    return out;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n must be positive. Uses rejection so the
  /// result is unbiased.
  uint64_t below(uint64_t n) {
    const uint64_t limit = max() - max() % n;
    uint64_t x = (*this)();
    while (x >= limit) x = (*this)();
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Independent child stream; `salt` distinguishes siblings.
  Rng fork(uint64_t salt) { return Rng(splitmix64((*this)() ^ splitmix64(salt))); }

  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
};

}  // namespace plr
