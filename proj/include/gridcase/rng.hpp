#pragma once

#include <cstdint>
#include <random>

namespace gridcase {

/// SplitMix64 finalizer, used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seedable stream with a platform-independent sequence.
///
/// The engine is `std::mt19937_64`, whose output is fixed by the standard.
/// Variates are produced here rather than through `<random>` distributions,
/// whose algorithms differ between standard libraries. A stream is keyed by
/// (seed, model tag, element index), so the draws for one generator do not
/// depend on how many draws other elements consumed.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index)
      : engine_(mix64(mix64(mix64(seed) ^ tag) ^ index)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double exponential(double rate);

  /// Box-Muller; one normal per call so the sequence does not depend on caching.
  double normal(double mean, double stddev);

 private:
  std::mt19937_64 engine_;
};

}  // namespace gridcase
