#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace powlab {

/// Reproducible random stream used by every simulation.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. A uniform variate on the open interval (0, 1) is built from the
/// top 53 bits as ((x >> 11) + 0.5) * 2^-53, and exponential variates use the
/// inverse transform -mean * ln(u). Any implementation following these three
/// rules reproduces the same traces up to the accuracy of ln().
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double exponential(double mean) { return -mean * std::log(uniform()); }

  /// Standard normal via Box-Muller; consumes two uniforms.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; gives independent per-sample seeds from one base seed.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace powlab
