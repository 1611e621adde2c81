#pragma once

#include <cmath>
#include <cstdint>

namespace mscea {

/// Splittable counter-based generator. The same (seed, stream index) pair
/// yields the same sequence on every platform, independent of how many
/// other streams exist or which thread consumes them.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform draw on the open interval (0, 1).
  double uniform01() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the spare deviate is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u = uniform01();
    double v = uniform01();
    double r = std::sqrt(-2.0 * std::log(u));
    double a = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Exponential with the given mean.
  double exponential(double mean) { return -mean * std::log(uniform01()); }

  /// Standard exponential, used for cumulative-hazard inversion.
  double exp1() { return -std::log(uniform01()); }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Derives the seed of an independent stream from a base seed and a stream
/// index (bootstrap replicate, simulated subject, harness replicate).
inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 mix(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
  mix.next();
  return mix.next();
}

}  // namespace mscea
