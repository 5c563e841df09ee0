#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace pepper {

// SplitMix64 step; used to derive independent seeds from (seed, stream ids).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (0x6a09e667f3bcc909ULL + b));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                              std::uint64_t d) {
  return mix_seed(mix_seed(a, b, c), d);
}

// Seeded generator with samplers whose byte-level behaviour is pinned by this
// code alone (std distributions vary across standard libraries; mt19937_64
// itself is fully specified).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // [0, 1)
  double next_double() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  // (0, 1); safe as a log argument
  double next_open() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // uniform on [0, n), rejection sampling to avoid modulo bias
  int next_int(int n) {
    assert(n > 0);
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= bound);
    return static_cast<int>(x % un);
  }

  double next_normal() {
    const double u1 = next_open();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 handled with the boost
  // Gamma(shape) = Gamma(shape+1) * U^(1/shape).
  double next_gamma(double shape) {
    assert(shape > 0.0);
    if (shape < 1.0) {
      const double g = next_gamma(shape + 1.0);
      const double u = next_open();
      return g * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = next_normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = next_open();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

 private:
  std::mt19937_64 eng_;
};

// One draw from a categorical distribution given probabilities (need not be
// perfectly normalised; treated as weights).
inline int sample_categorical(std::span<const double> p, Rng& rng) {
  assert(!p.empty());
  double total = 0.0;
  for (double v : p) total += v;
  double u = rng.next_double() * total;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    u -= p[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(p.size() - 1);
}

}  // namespace pepper
