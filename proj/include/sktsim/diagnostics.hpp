#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "sktsim/grid.hpp"
#include "sktsim/integrators.hpp"
#include "sktsim/model.hpp"

namespace sktsim {

/// Per-time snapshot of every functional appearing in the entropy estimates.
struct DiagnosticsRecord {
  double t = 0.0;
  double entropy = 0.0;
  double production = 0.0;            // instantaneous dissipation rate
  std::vector<double> mass;           // per species
  double l2_norm = 0.0;
  double linf = 0.0;
  std::vector<double> sqrt_grad;      // per species, int |grad sqrt(u_i)|^2
  std::vector<double> cross_sqrt_grad;// pairs (i,j), i<j, int |grad sqrt(u_i u_j)|^2
  long clamp_events = 0;
  double segregation = 0.0;           // Pearson correlation of species 0 and 1
};

inline int pair_count(int n) { return n * (n - 1) / 2; }

inline int pair_index(int n, int i, int j) {
  // index of (i, j) with i < j in row-major upper-triangle order
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

/// Pearson correlation of two species over the cells; constant fields map to 0.
inline double segregation_index(const SpeciesFields& u, int i, int j) {
  if (u.n < 2 || i == j) throw DomainError("segregation_index: needs two distinct species");
  const auto& a = u.data[i];
  const auto& b = u.data[j];
  const size_t m = a.size();
  double ma = 0.0, mb = 0.0;
  for (size_t c = 0; c < m; ++c) { ma += a[c]; mb += b[c]; }
  ma /= m;
  mb /= m;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t c = 0; c < m; ++c) {
    const double da = a[c] - ma, db = b[c] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

/// Entropy production rate 2 sum_i pi_i (2 a_i0 |grad sqrt(u_i)|^2 +
/// a_ii |grad u_i|^2 + sum_{j != i} a_ij |grad sqrt(u_i u_j)|^2), integrated.
inline DiagnosticsRecord record(const SpeciesFields& u, double t, const ModelParams& p,
                                long clamp_events = 0) {
  DiagnosticsRecord r;
  r.t = t;
  r.clamp_events = clamp_events;
  const Grid& g = u.grid;
  const int n = p.n;
  r.mass.resize(n);
  r.sqrt_grad.resize(n);
  r.cross_sqrt_grad.assign(pair_count(n), 0.0);

  std::vector<double> tmp(static_cast<size_t>(g.cells()));
  std::vector<double> grad_u_sq(n);
  for (int i = 0; i < n; ++i) {
    r.mass[i] = integrate(g, u.data[i]);
    for (int c = 0; c < g.cells(); ++c) tmp[c] = std::sqrt(u.data[i][c]);
    r.sqrt_grad[i] = gradient_sq_norm(g, tmp);
    grad_u_sq[i] = gradient_sq_norm(g, u.data[i]);
    for (double x : u.data[i]) r.linf = std::max(r.linf, std::fabs(x));
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      for (int c = 0; c < g.cells(); ++c) tmp[c] = std::sqrt(u.data[i][c] * u.data[j][c]);
      r.cross_sqrt_grad[pair_index(n, i, j)] = gradient_sq_norm(g, tmp);
    }

  r.entropy = entropy(u, p).total;
  double prod = 0.0;
  for (int i = 0; i < n; ++i) {
    double s = 2.0 * p.a0[i] * r.sqrt_grad[i] + p.a[i][i] * grad_u_sq[i];
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const int q = pair_index(n, std::min(i, j), std::max(i, j));
      s += p.a[i][j] * r.cross_sqrt_grad[q];
    }
    prod += 2.0 * p.pi[i] * s;
  }
  r.production = prod;
  r.l2_norm = l2_norm(u);
  r.segregation = (n >= 2) ? segregation_index(u, 0, 1) : 0.0;
  return r;
}

// --- Bochner norms of a trajectory ---------------------------------------------

/// Norms from the no-self-diffusion regularity list; rho_1 = (d+2)/(d+1) and
/// rho_2 = (2d+2)/(2d+1) are recorded alongside.
struct NormReport {
  double rho1 = 0.0;
  double rho2 = 0.0;
  double lrho1_w1rho1 = 0.0;             // ||u|| in L^rho1(0,T; W^{1,rho1})
  std::vector<double> lrho2_grad_pair;   // ||grad(u_i u_j)|| in L^rho2(Q_T), pairs i<j
  double l1p2d = 0.0;                    // ||u|| in L^{1+2/d}(Q_T)
};

/// Snapshot-trapezoid Bochner norms over a completed trajectory.
inline NormReport norm_report(const Trajectory& traj, const ModelParams& p) {
  if (!traj.terminal.completed())
    throw NormUnavailable("norm_report: trajectory " + traj.terminal.describe());
  if (traj.states.size() < 2) throw NormUnavailable("norm_report: need at least two snapshots");
  const Grid& g = traj.states.front().grid;
  const int d = g.dims;
  const int n = p.n;
  NormReport rep;
  rep.rho1 = (d + 2.0) / (d + 1.0);
  rep.rho2 = (2.0 * d + 2.0) / (2.0 * d + 1.0);
  const double pq = 1.0 + 2.0 / d;

  const size_t K = traj.states.size();
  std::vector<double> w1(K), pairs(K * pair_count(n)), lq(K);
  std::vector<double> prod(static_cast<size_t>(g.cells()));
  for (size_t s = 0; s < K; ++s) {
    const auto& u = traj.states[s];
    double acc1 = 0.0, accq = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto gm = gradient_magnitude_cells(g, u.data[i]);
      for (int c = 0; c < g.cells(); ++c) {
        acc1 += std::pow(std::fabs(u.data[i][c]), rep.rho1) + std::pow(gm[c], rep.rho1);
        accq += std::pow(std::fabs(u.data[i][c]), pq);
      }
    }
    w1[s] = acc1 * g.cell_volume();
    lq[s] = accq * g.cell_volume();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        for (int c = 0; c < g.cells(); ++c) prod[c] = u.data[i][c] * u.data[j][c];
        const auto gm = gradient_magnitude_cells(g, prod);
        double acc = 0.0;
        for (int c = 0; c < g.cells(); ++c) acc += std::pow(gm[c], rep.rho2);
        pairs[s * pair_count(n) + pair_index(n, i, j)] = acc * g.cell_volume();
      }
  }

  auto trapezoid = [&](auto&& f) {
    double s = 0.0;
    for (size_t k = 0; k + 1 < K; ++k)
      s += 0.5 * (f(k) + f(k + 1)) * (traj.times[k + 1] - traj.times[k]);
    return s;
  };
  rep.lrho1_w1rho1 = std::pow(trapezoid([&](size_t k) { return w1[k]; }), 1.0 / rep.rho1);
  rep.l1p2d = std::pow(trapezoid([&](size_t k) { return lq[k]; }), 1.0 / pq);
  rep.lrho2_grad_pair.resize(pair_count(n));
  for (int q = 0; q < pair_count(n); ++q)
    rep.lrho2_grad_pair[q] =
        std::pow(trapezoid([&](size_t k) { return pairs[k * pair_count(n) + q]; }), 1.0 / rep.rho2);
  return rep;
}

// --- fractional time seminorm ----------------------------------------------------

/// Sobolev-Slobodeckij seminorm (p = 2) of a sampled scalar series: double sum
/// over sample pairs weighted by the midpoint (Voronoi) cell widths, diagonal
/// excluded.
inline double fractional_seminorm(std::span<const double> times, std::span<const double> values,
                                  double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("fractional_seminorm: alpha must lie in (0,1)");
  const size_t K = times.size();
  if (K < 2 || values.size() != K) throw DomainError("fractional_seminorm: need >= 2 samples");
  std::vector<double> w(K);
  w[0] = 0.5 * (times[1] - times[0]);
  w[K - 1] = 0.5 * (times[K - 1] - times[K - 2]);
  for (size_t k = 1; k + 1 < K; ++k) w[k] = 0.5 * (times[k + 1] - times[k - 1]);
  const double e = 1.0 + 2.0 * alpha;
  double s = 0.0;
  for (size_t i = 0; i < K; ++i)
    for (size_t j = i + 1; j < K; ++j) {
      const double dtau = times[j] - times[i];
      if (dtau == 0.0) continue;
      const double dv = values[j] - values[i];
      s += 2.0 * (dv * dv) / std::pow(dtau, e) * w[i] * w[j];
    }
  return s;
}

/// Trajectory version: the X-norm is the discrete L2 norm of the state difference.
inline double fractional_seminorm_l2(const Trajectory& traj, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("fractional_seminorm: alpha must lie in (0,1)");
  const size_t K = traj.states.size();
  if (K < 2) throw DomainError("fractional_seminorm: need >= 2 samples");
  std::vector<double> w(K);
  w[0] = 0.5 * (traj.times[1] - traj.times[0]);
  w[K - 1] = 0.5 * (traj.times[K - 1] - traj.times[K - 2]);
  for (size_t k = 1; k + 1 < K; ++k) w[k] = 0.5 * (traj.times[k + 1] - traj.times[k - 1]);
  const double e = 1.0 + 2.0 * alpha;
  const double vol = traj.states.front().grid.cell_volume();
  double s = 0.0;
  for (size_t i = 0; i < K; ++i)
    for (size_t j = i + 1; j < K; ++j) {
      const double dtau = traj.times[j] - traj.times[i];
      if (dtau == 0.0) continue;
      double diff2 = 0.0;
      for (int sp = 0; sp < traj.states[i].n; ++sp)
        for (size_t c = 0; c < traj.states[i].data[sp].size(); ++c) {
          const double dv = traj.states[j].data[sp][c] - traj.states[i].data[sp][c];
          diff2 += dv * dv;
        }
      diff2 *= vol;
      s += 2.0 * diff2 / std::pow(dtau, e) * w[i] * w[j];
    }
  return s;
}

} // namespace sktsim
