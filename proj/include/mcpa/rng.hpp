#pragma once

#include <cmath>
#include <cstdint>

namespace mcpa {

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, counter), so consumers can draw in any order without
/// sharing state and a problem is reproducible from its seed alone.
///
/// Stream ids used by the synthetic generator (synth.cpp):
///   0  scene point coordinates    counter = 3*point + axis
///   1  per-observation noise std  counter = obs_slot
///   2  pixel noise               counter = 2*obs_slot + {0,1}
///   3  init rotation axis        counter = 3*pose + axis
///   4  init translation noise    counter = 3*pose + axis
///   5  random base selection     counter = caller-defined
/// where obs_slot = (point * n_poses + pose) * n_cameras + camera, fixed by
/// the problem dimensions and independent of visibility filtering.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(seed ^ 0x9e3779b97f4a7c15ULL, stream)) {}

  /// Uniform in [0, 2^64).
  std::uint64_t bits(std::uint64_t counter) const { return mix(key_, counter); }

  /// Uniform in [0, 1).
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

  /// Standard normal via Box-Muller; consumes counters 2k and 2k+1.
  double normal(std::uint64_t pair_index) const {
    const double u1 = uniform(2 * pair_index);
    const double u2 = uniform(2 * pair_index + 1);
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * M_PI * u2);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t counter, std::uint64_t n) const {
    return bits(counter) % n;
  }

 private:
  // splitmix64 finalizer over a keyed counter
  static std::uint64_t mix(std::uint64_t key, std::uint64_t x) {
    std::uint64_t z = x + key + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

}  // namespace mcpa
