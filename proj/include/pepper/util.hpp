#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pepper {

using Vec = std::vector<double>;

// Row-major dense matrix; just enough for categorical tables.
struct Matrix {
  int rows = 0;
  int cols = 0;
  Vec a;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, fill) {}

  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
  std::span<double> row(int r) { return {a.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
  std::span<const double> row(int r) const { return {a.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }

  Matrix transposed() const {
    Matrix t(cols, rows);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) t.at(c, r) = at(r, c);
    return t;
  }
};

inline double sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Normalises in place; returns the pre-normalisation sum.
inline double normalize(std::span<double> v) {
  const double s = sum(v);
  if (s <= 0.0) throw std::runtime_error("normalize: non-positive mass");
  const double inv = 1.0 / s;
  for (double& x : v) x *= inv;
  return s;
}

inline bool is_distribution(std::span<const double> v, double tol = 1e-9) {
  if (v.empty()) return false;
  double s = 0.0;
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) return false;
    s += x;
  }
  return std::abs(s - 1.0) <= tol;
}

// Shannon entropy in nats; 0 log 0 = 0.
inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

// KL(p ‖ q) in nats; requires q > 0 wherever p > 0.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  assert(p.size() == q.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      assert(q[i] > 0.0);
      d += p[i] * std::log(p[i] / q[i]);
    }
  }
  return d;
}

// Digamma via upward recurrence into the asymptotic regime (x >= 12, terms
// through x^-10), good to ~1e-14 for positive arguments.
inline double digamma(double x) {
  assert(x > 0.0);
  double result = 0.0;
  while (x < 12.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 -
                            inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
  return result;
}

// FNV-1a 64-bit; stable across platforms (std::hash is not pinned).
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace pepper
