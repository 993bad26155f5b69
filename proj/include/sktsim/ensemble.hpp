#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sktsim/diagnostics.hpp"
#include "sktsim/errors.hpp"
#include "sktsim/integrators.hpp"
#include "sktsim/noise.hpp"

namespace sktsim {

/// Monte Carlo estimate of one path functional. m_paths counts the paths that
/// entered the estimate (guard-stopped paths are excluded and show up in
/// stopped_fraction instead).
struct EnsembleStats {
  std::string functional_name;
  int m_paths = 0;
  double mean = 0.0;
  double variance = 0.0;
  double ci95_halfwidth = 0.0;
  double stopped_fraction = 0.0;
};

/// Registry entry: entropy_at(t), sup_L1, dissipation_integral (optionally up
/// to t), terminal_state_mean, or moment_p of any of those.
struct FunctionalSpec {
  std::string name;
  double t = -1.0;    // entropy_at / dissipation_integral time, < 0 -> terminal
  double p = 1.0;     // moment order for moment_p
  std::string base;   // base functional for moment_p

  std::string label() const {
    std::string s = name;
    if (name == "moment_p") s += "(" + base + ",p=" + std::to_string(p) + ")";
    if (t >= 0.0) s += "@t=" + std::to_string(t);
    return s;
  }
};

namespace detail {

inline size_t snapshot_at(const Trajectory& traj, double t) {
  size_t best = 0;
  double bd = std::fabs(traj.times[0] - t);
  for (size_t k = 1; k < traj.times.size(); ++k) {
    const double d = std::fabs(traj.times[k] - t);
    if (d < bd) { bd = d; best = k; }
  }
  return best;
}

inline double trapezoid_production(const Trajectory& traj, const ModelParams& p, double upto) {
  double s = 0.0;
  double prev_t = traj.times[0];
  double prev_v = record(traj.states[0], prev_t, p).production;
  for (size_t k = 1; k < traj.times.size(); ++k) {
    if (traj.times[k] > upto + 1e-12) break;
    const double v = record(traj.states[k], traj.times[k], p).production;
    s += 0.5 * (prev_v + v) * (traj.times[k] - prev_t);
    prev_t = traj.times[k];
    prev_v = v;
  }
  return s;
}

} // namespace detail

inline double evaluate_functional(const FunctionalSpec& spec, const Trajectory& traj,
                                  const ModelParams& p) {
  if (spec.name == "moment_p") {
    FunctionalSpec base = spec;
    base.name = spec.base;
    const double v = evaluate_functional(base, traj, p);
    return spec.p == 1.0 ? v : std::pow(v, spec.p);
  }
  if (spec.name == "entropy_at") {
    const double t = spec.t >= 0.0 ? spec.t : traj.times.back();
    return entropy(traj.states[detail::snapshot_at(traj, t)], p).total;
  }
  if (spec.name == "sup_L1") {
    double best = 0.0;
    for (const auto& u : traj.states) {
      double m = 0.0;
      for (int i = 0; i < u.n; ++i) m += integrate(u.grid, u.data[i]);
      best = std::max(best, m);
    }
    return best;
  }
  if (spec.name == "dissipation_integral") {
    const double upto = spec.t >= 0.0 ? spec.t : traj.times.back();
    return detail::trapezoid_production(traj, p, upto);
  }
  if (spec.name == "terminal_state_mean") {
    const auto& u = traj.states.back();
    double m = 0.0;
    for (int i = 0; i < u.n; ++i) m += integrate(u.grid, u.data[i]);
    return m / (u.grid.volume() * u.n);
  }
  if (spec.name == "terminal_l2") return l2_norm(traj.states.back());
  throw DomainError("unknown functional: " + spec.name);
}

/// Mean/variance/CI over per-path values accumulated in fixed path order.
inline EnsembleStats reduce_stats(const std::string& name, const std::vector<double>& values,
                                  int stopped, int total) {
  EnsembleStats s;
  s.functional_name = name;
  s.m_paths = static_cast<int>(values.size());
  s.stopped_fraction = total > 0 ? static_cast<double>(stopped) / total : 0.0;
  double mean = 0.0, m2 = 0.0;
  long k = 0;
  for (double x : values) {
    ++k;
    const double d = x - mean;
    mean += d / k;
    m2 += d * (x - mean);
  }
  s.mean = mean;
  s.variance = k > 1 ? m2 / (k - 1) : 0.0;
  s.ci95_halfwidth = k > 0 ? 1.96 * std::sqrt(s.variance / k) : 0.0;
  return s;
}

struct EnsembleResult {
  std::vector<EnsembleStats> stats;
  int stopped_paths = 0;
  int total_paths = 0;
};

/// Independent paths, seed of member k derived from (base_seed, k); results
/// identical for any thread count because per-path values land in a
/// preallocated slot and the reduction runs in path-index order.
inline EnsembleResult run_ensemble(const SpeciesFields& u0, const ModelParams& params,
                                   const StepConfig& cfg, double T, int M, int m_paths,
                                   uint64_t base_seed, const std::vector<FunctionalSpec>& specs,
                                   int threads = 1, int sample_stride = 1) {
  if (m_paths < 1) throw DomainError("run_ensemble: need at least one path");
  const size_t nf = specs.size();
  std::vector<double> values(static_cast<size_t>(m_paths) * nf, 0.0);
  std::vector<uint8_t> completed(m_paths, 0);

  auto worker = [&](std::atomic<int>& counter) {
    for (;;) {
      const int k = counter.fetch_add(1);
      if (k >= m_paths) return;
      const WienerPath path = sample_path(derive_stream_seed(base_seed, k), params.n, T, M);
      const Trajectory traj = simulate_path(u0, path, params, cfg, sample_stride);
      if (!traj.terminal.completed()) continue;
      completed[k] = 1;
      for (size_t f = 0; f < nf; ++f)
        values[static_cast<size_t>(k) * nf + f] = evaluate_functional(specs[f], traj, params);
    }
  };

  std::atomic<int> counter{0};
  const int nthreads = std::max(1, threads);
  if (nthreads == 1) {
    worker(counter);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back([&]() { worker(counter); });
    for (auto& th : pool) th.join();
  }

  EnsembleResult out;
  out.total_paths = m_paths;
  for (int k = 0; k < m_paths; ++k)
    if (!completed[k]) ++out.stopped_paths;
  if (out.stopped_paths == m_paths)
    throw EnsembleDegenerate("run_ensemble: every path hit the guard");

  std::vector<double> per_functional;
  per_functional.reserve(m_paths);
  for (size_t f = 0; f < nf; ++f) {
    per_functional.clear();
    for (int k = 0; k < m_paths; ++k)
      if (completed[k]) per_functional.push_back(values[static_cast<size_t>(k) * nf + f]);
    out.stats.push_back(reduce_stats(specs[f].label(), per_functional, out.stopped_paths, m_paths));
  }
  return out;
}

/// E[(functional)^p] with the same accumulation path as run_ensemble.
inline EnsembleStats moment_estimate(const std::vector<double>& per_path_values, double p,
                                     const std::string& name = "moment") {
  if (p < 1.0) throw DomainError("moment_estimate: p must be >= 1");
  std::vector<double> powered(per_path_values.size());
  for (size_t k = 0; k < per_path_values.size(); ++k)
    powered[k] = p == 1.0 ? per_path_values[k] : std::pow(per_path_values[k], p);
  return reduce_stats(name + "^" + std::to_string(p), powered, 0, static_cast<int>(powered.size()));
}

// --- Gronwall-shape entropy bound check ---------------------------------------

struct GronwallRow {
  double t = 0.0;
  double lhs_mean = 0.0;      // E[H(t)] + E[dissipation integral to t]
  double lhs_ci = 0.0;
  double bound_shape = 0.0;   // (1 + h0) exp(C_h t)
};

struct GronwallReport {
  double C_h = 0.0;
  double h0 = 0.0;
  double K_fit = 0.0;   // smallest K with lhs_mean <= K * bound_shape on the grid
  int violations = 0;   // points with lhs_mean - ci > K * bound_shape
  std::vector<GronwallRow> rows;
};

/// Fits K = max lhs/shape and counts CI-robust violations of the fitted (or a
/// caller-supplied) constant.
inline GronwallReport gronwall_check(const std::vector<double>& times,
                                     const std::vector<EnsembleStats>& entropy_stats,
                                     const std::vector<EnsembleStats>& dissipation_stats,
                                     double C_h, double h0,
                                     std::optional<double> K_fixed = std::nullopt) {
  GronwallReport rep;
  rep.C_h = C_h;
  rep.h0 = h0;
  for (size_t k = 0; k < times.size(); ++k) {
    GronwallRow row;
    row.t = times[k];
    row.lhs_mean = entropy_stats[k].mean + dissipation_stats[k].mean;
    row.lhs_ci = entropy_stats[k].ci95_halfwidth + dissipation_stats[k].ci95_halfwidth;
    row.bound_shape = (1.0 + h0) * std::exp(C_h * times[k]);
    rep.rows.push_back(row);
    if (row.bound_shape > 0.0) rep.K_fit = std::max(rep.K_fit, row.lhs_mean / row.bound_shape);
  }
  const double K = K_fixed.value_or(rep.K_fit);
  if (K_fixed) rep.K_fit = *K_fixed;
  for (const auto& row : rep.rows)
    if (row.lhs_mean - row.lhs_ci > K * row.bound_shape) ++rep.violations;
  return rep;
}

} // namespace sktsim
