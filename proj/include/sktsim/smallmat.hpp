#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace sktsim {

// Dense n-by-n helpers for the per-cell species blocks. n is the species
// count, typically 1..4, so everything is plain row-major with pivoted LU.

// In-place LU with partial pivoting. Returns false on a (numerically) singular block.
inline bool lu_factor(std::span<double> m, int n, std::span<int> piv) {
  for (int i = 0; i < n; ++i) piv[i] = i;
  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::fabs(m[static_cast<size_t>(k) * n + k]);
    for (int i = k + 1; i < n; ++i) {
      const double v = std::fabs(m[static_cast<size_t>(i) * n + k]);
      if (v > best) { best = v; p = i; }
    }
    if (best == 0.0 || !std::isfinite(best)) return false;
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(m[static_cast<size_t>(k) * n + j], m[static_cast<size_t>(p) * n + j]);
      std::swap(piv[k], piv[p]);
    }
    const double inv = 1.0 / m[static_cast<size_t>(k) * n + k];
    for (int i = k + 1; i < n; ++i) {
      const double f = m[static_cast<size_t>(i) * n + k] * inv;
      m[static_cast<size_t>(i) * n + k] = f;
      for (int j = k + 1; j < n; ++j) m[static_cast<size_t>(i) * n + j] -= f * m[static_cast<size_t>(k) * n + j];
    }
  }
  return true;
}

// Solves LU x = b. x must not alias b; no allocation.
inline void lu_solve(std::span<const double> lu, int n, std::span<const int> piv,
                     std::span<const double> b, std::span<double> x) {
  for (int i = 0; i < n; ++i) x[i] = b[piv[i]];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) x[i] -= lu[static_cast<size_t>(i) * n + j] * x[j];
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) x[i] -= lu[static_cast<size_t>(i) * n + j] * x[j];
    x[i] /= lu[static_cast<size_t>(i) * n + i];
  }
}

} // namespace sktsim
