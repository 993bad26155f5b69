#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace sktsim {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for member k of an ensemble rooted at base_seed.
inline uint64_t derive_stream_seed(uint64_t base_seed, uint64_t k) {
  return splitmix64(base_seed ^ splitmix64(k));
}

/// Uniform doubles in (0, 1]; mt19937_64 keeps the bit stream standardized.
class UniformStream {
public:
  explicit UniformStream(uint64_t seed) : eng_(seed) {}
  double next() {
    const uint64_t bits = eng_() >> 11; // 53 bits
    return 1.0 - bits * 0x1p-53;        // in (0, 1]
  }
  uint64_t next_bits() { return eng_(); }

private:
  std::mt19937_64 eng_;
};

/// Standard normals via Box-Muller on the uniform stream. The transform is
/// fixed here rather than taken from std::normal_distribution so that the
/// draw sequence is identical for every build of the same binary.
class NormalStream {
public:
  explicit NormalStream(uint64_t seed) : u_(seed) {}
  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = u_.next();
    const double u2 = u_.next();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

private:
  UniformStream u_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

} // namespace sktsim
