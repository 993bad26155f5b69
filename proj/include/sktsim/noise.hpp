#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sktsim/errors.hpp"
#include "sktsim/rng.hpp"

namespace sktsim {

/// n-dimensional Wiener increments on a uniform mesh of [0, T], plus node
/// values W(t_k) precomputed once so interpolation and coarsening reuse the
/// exact same partial sums.
struct WienerPath {
  uint64_t seed = 0;
  int n = 1;
  double T = 1.0;
  int M = 1;
  double eta = 1.0;
  std::vector<double> increments; // M x n, row k = Delta W_k
  std::vector<double> nodes;      // (M+1) x n, row k = W(t_k)

  double increment(int k, int j) const { return increments[static_cast<size_t>(k) * n + j]; }
  double node(int k, int j) const { return nodes[static_cast<size_t>(k) * n + j]; }
  double time(int k) const { return k * eta; }
};

inline WienerPath sample_path(uint64_t seed, int n, double T, int M) {
  if (!(T > 0.0)) throw DomainError("sample_path: T must be positive");
  if (M < 1) throw DomainError("sample_path: need at least one interval");
  if (n < 1) throw DomainError("sample_path: need at least one dimension");
  WienerPath p;
  p.seed = seed;
  p.n = n;
  p.T = T;
  p.M = M;
  p.eta = T / M;
  p.increments.resize(static_cast<size_t>(M) * n);
  p.nodes.assign(static_cast<size_t>(M + 1) * n, 0.0);
  NormalStream g(seed);
  const double s = std::sqrt(p.eta);
  for (int k = 0; k < M; ++k)
    for (int j = 0; j < n; ++j) {
      const double dw = s * g.next();
      p.increments[static_cast<size_t>(k) * n + j] = dw;
      p.nodes[static_cast<size_t>(k + 1) * n + j] = p.nodes[static_cast<size_t>(k) * n + j] + dw;
    }
  return p;
}

/// Piecewise-linear interpolant W^(eta)(t); exactly the stored node values at t_k.
inline std::vector<double> wz_value(const WienerPath& p, double t) {
  if (t < 0.0 || t > p.T) throw DomainError("wz_value: t outside [0, T]");
  std::vector<double> out(p.n);
  if (t == p.T) { // M * eta need not reproduce T bitwise
    for (int j = 0; j < p.n; ++j) out[j] = p.node(p.M, j);
    return out;
  }
  int k = static_cast<int>(t / p.eta);
  if (k >= p.M) k = p.M - 1;
  if (t >= (k + 1) * p.eta && k + 1 < p.M) ++k; // guard against floor roundoff
  const double tk = k * p.eta;
  if (t == tk) {
    for (int j = 0; j < p.n; ++j) out[j] = p.node(k, j);
    return out;
  }
  if (t == (k + 1) * p.eta) {
    for (int j = 0; j < p.n; ++j) out[j] = p.node(k + 1, j);
    return out;
  }
  const double frac = (t - tk) / p.eta;
  for (int j = 0; j < p.n; ++j) out[j] = p.node(k, j) + frac * (p.node(k + 1, j) - p.node(k, j));
  return out;
}

/// Constant forcing slope Delta W_k / eta of the Wong-Zakai interpolant.
inline std::vector<double> wz_slope(const WienerPath& p, int k) {
  if (k < 0 || k >= p.M) throw DomainError("wz_slope: interval index out of range");
  std::vector<double> out(p.n);
  for (int j = 0; j < p.n; ++j) out[j] = p.increment(k, j) / p.eta;
  return out;
}

/// Halve the time step by Brownian-bridge midpoint insertion. Coarse node
/// values are copied verbatim, so they match the input path bitwise.
inline WienerPath refine_bridge(const WienerPath& p) {
  WienerPath q;
  q.seed = p.seed;
  q.n = p.n;
  q.T = p.T;
  q.M = 2 * p.M;
  q.eta = p.eta / 2.0;
  q.nodes.assign(static_cast<size_t>(q.M + 1) * q.n, 0.0);
  q.increments.resize(static_cast<size_t>(q.M) * q.n);
  NormalStream g(derive_stream_seed(p.seed, 0xb71d6eULL + static_cast<uint64_t>(p.M)));
  const double s = std::sqrt(p.eta / 4.0);
  for (int k = 0; k < p.M; ++k)
    for (int j = 0; j < p.n; ++j) {
      const double wl = p.node(k, j);
      const double wr = p.node(k + 1, j);
      const double mid = 0.5 * (wl + wr) + s * g.next();
      q.nodes[static_cast<size_t>(2 * k) * q.n + j] = wl;
      q.nodes[static_cast<size_t>(2 * k + 1) * q.n + j] = mid;
      q.nodes[static_cast<size_t>(2 * k + 2) * q.n + j] = wr;
      q.increments[static_cast<size_t>(2 * k) * q.n + j] = mid - wl;
      q.increments[static_cast<size_t>(2 * k + 1) * q.n + j] = wr - mid;
    }
  return q;
}

/// Merge groups of `factor` intervals. Node values at the kept mesh points are
/// copied verbatim; used by strong-convergence studies to share one driving
/// path across step sizes.
inline WienerPath coarsen_path(const WienerPath& p, int factor) {
  if (factor < 1 || p.M % factor != 0) throw DomainError("coarsen_path: factor must divide M");
  WienerPath q;
  q.seed = p.seed;
  q.n = p.n;
  q.T = p.T;
  q.M = p.M / factor;
  q.eta = p.eta * factor;
  q.nodes.resize(static_cast<size_t>(q.M + 1) * q.n);
  q.increments.resize(static_cast<size_t>(q.M) * q.n);
  for (int k = 0; k <= q.M; ++k)
    for (int j = 0; j < q.n; ++j)
      q.nodes[static_cast<size_t>(k) * q.n + j] = p.node(k * factor, j);
  for (int k = 0; k < q.M; ++k)
    for (int j = 0; j < q.n; ++j)
      q.increments[static_cast<size_t>(k) * q.n + j] =
          q.nodes[static_cast<size_t>(k + 1) * q.n + j] - q.nodes[static_cast<size_t>(k) * q.n + j];
  return q;
}

} // namespace sktsim
