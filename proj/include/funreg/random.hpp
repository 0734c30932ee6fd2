#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace funreg {

// splitmix64 finalizer; used to whiten derived stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Deterministic normal/uniform source on top of std::mt19937_64.
//
// Uniforms are built from the raw 64-bit output directly and normals via
// Box-Muller, so a (seed, draw index) pair maps to the same value on every
// platform up to libm rounding. std::normal_distribution is avoided because
// its algorithm is implementation-defined.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Per-trial stream derivation: (master seed, tags...) -> independent seed.
// Deterministic, order-sensitive, collision-resistant enough for desk-scale
// trial counts.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ (a * 0xD6E8FEB86659FD93ULL));
  h = mix64(h ^ (b * 0xCA5A826395121157ULL));
  h = mix64(h ^ (c * 0x9E3779B97F4A7C15ULL));
  return h;
}

inline RandomStream derive_stream(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                  std::uint64_t c = 0) {
  return RandomStream(derive_seed(master, a, b, c));
}

}  // namespace funreg
