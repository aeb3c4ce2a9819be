#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace nrdr {

// splitmix64 finalizer, used to derive decorrelated sub-stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// Deterministic RNG with bit-identical output across platforms. mt19937_64 is
// fully specified by the standard; the conversions below avoid
// std::*_distribution, whose results are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1), safe as input to log or inverse CDFs.
  double uniform_open() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Laplace(mu, b) via inverse CDF.
  double laplace(double mu, double b) {
    const double u = uniform_open() - 0.5;
    const double s = u < 0.0 ? -1.0 : 1.0;
    return mu - b * s * std::log(1.0 - 2.0 * std::abs(u));
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace nrdr
