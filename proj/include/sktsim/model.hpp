#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sktsim/errors.hpp"
#include "sktsim/grid.hpp"
#include "sktsim/rng.hpp"

namespace sktsim {

/// Optional user-supplied stochastic diffusion law sigma(u), row-major n x n.
using SigmaLaw = std::function<void(std::span<const double> u, std::vector<double>& sigma)>;

enum class DiffusionRegime { with_self_diffusion, without_self_diffusion, mixed };

/// Coefficients of the n-species cross-diffusion system plus the noise law.
struct ModelParams {
  int n = 1;
  std::vector<double> a0;             // diffusion coefficients a_{i0}
  std::vector<std::vector<double>> a; // self/cross coefficients a_{ij}
  std::vector<double> pi;             // reversible measure, pi_i > 0
  double gamma = 1.0;                 // noise exponent in (0, 1]
  double sigma_scale = 0.0;           // overall noise amplitude
  SigmaLaw custom_sigma;              // empty -> built-in diagonal law

  DiffusionRegime regime() const {
    bool all_self = true, no_self = true;
    for (int i = 0; i < n; ++i) {
      if (a[i][i] <= 0.0) all_self = false;
      if (a[i][i] != 0.0 || a0[i] <= 0.0) no_self = false;
    }
    if (all_self) return DiffusionRegime::with_self_diffusion;
    if (no_self) return DiffusionRegime::without_self_diffusion;
    return DiffusionRegime::mixed;
  }
};

struct EntropyValue {
  double total = 0.0;
  std::vector<double> per_species;
};

// --- pointwise algebra ------------------------------------------------------

/// A_ij(u) = delta_ij (a_i0 + sum_k a_ik u_k) + a_ij u_i, row-major.
inline std::vector<double> diffusion_matrix(std::span<const double> u, const ModelParams& p) {
  const int n = p.n;
  for (int i = 0; i < n; ++i)
    if (u[i] < 0.0) throw DomainError("diffusion_matrix: negative density");
  std::vector<double> A(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    double diag = p.a0[i];
    for (int k = 0; k < n; ++k) diag += p.a[i][k] * u[k];
    for (int j = 0; j < n; ++j) {
      double v = p.a[i][j] * u[i];
      if (i == j) v += diag;
      A[static_cast<size_t>(i) * n + j] = v;
    }
  }
  return A;
}

/// F_i(u) = a_i0 u_i + sum_j a_ij u_i u_j; the Laplacian of F drives the dynamics.
inline void flux_point(std::span<const double> u, const ModelParams& p, std::span<double> out) {
  for (int i = 0; i < p.n; ++i) {
    double s = p.a0[i];
    for (int j = 0; j < p.n; ++j) s += p.a[i][j] * u[j];
    out[i] = s * u[i];
  }
}

inline SpeciesFields flux(const SpeciesFields& u, const ModelParams& p) {
  SpeciesFields out(u.grid, u.n);
  std::vector<double> up(u.n), fp(u.n);
  for (int c = 0; c < u.grid.cells(); ++c) {
    for (int i = 0; i < u.n; ++i) up[i] = u.data[i][c];
    flux_point(up, p, fp);
    for (int i = 0; i < u.n; ++i) out.data[i][c] = fp[i];
  }
  return out;
}

/// Entropy density summand u(log u - 1) + 1, with the exact limit 1 at u = 0.
inline double entropy_summand(double u) {
  if (u == 0.0) return 1.0;
  return u * (std::log(u) - 1.0) + 1.0;
}

inline EntropyValue entropy(const SpeciesFields& u, const ModelParams& p) {
  EntropyValue e;
  e.per_species.assign(p.n, 0.0);
  const double vol = u.grid.cell_volume();
  for (int i = 0; i < p.n; ++i) {
    double s = 0.0;
    for (double x : u.data[i]) s += entropy_summand(x);
    e.per_species[i] = p.pi[i] * s * vol;
    e.total += e.per_species[i];
  }
  return e;
}

/// Smooth positive part used by the regularized entropy: g(z) + delta > 0 for
/// every real z and g(z) -> max(z, 0) as delta -> 0.
inline double smooth_positive_part(double z, double delta) {
  return 0.5 * (z + std::sqrt(z * z + delta * delta));
}

/// h_delta with the smooth positive part applied first, so slightly negative
/// entries stay finite. Converges to entropy(u) as delta -> 0 on u >= 0.
inline EntropyValue regularized_entropy(const SpeciesFields& u, const ModelParams& p, double delta) {
  if (!(delta > 0.0)) throw DomainError("regularized_entropy: delta must be positive");
  EntropyValue e;
  e.per_species.assign(p.n, 0.0);
  const double vol = u.grid.cell_volume();
  for (int i = 0; i < p.n; ++i) {
    double s = 0.0;
    for (double x : u.data[i]) {
      const double g = smooth_positive_part(x, delta) + delta;
      s += g * (std::log(g) - 1.0) + 1.0;
    }
    e.per_species[i] = p.pi[i] * s * vol;
    e.total += e.per_species[i];
  }
  return e;
}

/// w_i = pi_i log u_i (chemical potentials). Requires strictly positive input.
inline void to_entropy_vars(std::span<const double> u, const ModelParams& p, std::span<double> w) {
  for (int i = 0; i < p.n; ++i) {
    if (!(u[i] > 0.0)) throw DomainError("to_entropy_vars: density must be positive");
    w[i] = p.pi[i] * std::log(u[i]);
  }
}

/// Inverse map u_i = exp(w_i / pi_i); strictly positive for any finite w.
inline void from_entropy_vars(std::span<const double> w, const ModelParams& p, std::span<double> u) {
  for (int i = 0; i < p.n; ++i) u[i] = std::exp(w[i] / p.pi[i]);
}

inline double pow_one_minus_gamma(double z, double gamma) {
  if (gamma == 1.0) return 1.0;
  if (gamma == 0.5) return std::sqrt(z);
  return std::pow(z, 1.0 - gamma);
}

/// Built-in diagonal law sigma_i(z) = scale * z / (1 + z^(1-gamma)).
inline double sigma_builtin(double z, const ModelParams& p) {
  if (z <= 0.0) return 0.0;
  return p.sigma_scale * z / (1.0 + pow_one_minus_gamma(z, p.gamma));
}

/// d/dz of the built-in law, finite down to z = 0.
inline double sigma_builtin_deriv(double z, const ModelParams& p) {
  if (z < 0.0) return 0.0;
  const double q = pow_one_minus_gamma(z, p.gamma); // z^0 == 1 at gamma == 1, also at z == 0
  const double d = 1.0 + q;
  return p.sigma_scale * (1.0 + p.gamma * q) / (d * d);
}

/// sigma_ij(u), row-major n x n. Diagonal built-in law unless a custom law is set.
inline std::vector<double> sigma_eval(std::span<const double> u, const ModelParams& p) {
  std::vector<double> s(static_cast<size_t>(p.n) * p.n, 0.0);
  if (p.custom_sigma) {
    p.custom_sigma(u, s);
    return s;
  }
  for (int i = 0; i < p.n; ++i) s[static_cast<size_t>(i) * p.n + i] = sigma_builtin(u[i], p);
  return s;
}

/// dsigma_ij/du_k as a flat array indexed (i*n + j)*n + k. Analytic for the
/// built-in diagonal law; central differences with step 1e-6*max(1, |u_k|)
/// for a user-supplied law.
inline std::vector<double> sigma_jacobian(std::span<const double> u, const ModelParams& p) {
  const int n = p.n;
  std::vector<double> jac(static_cast<size_t>(n) * n * n, 0.0);
  if (!p.custom_sigma) {
    for (int i = 0; i < n; ++i)
      jac[(static_cast<size_t>(i) * n + i) * n + i] = sigma_builtin_deriv(u[i], p);
    return jac;
  }
  std::vector<double> up(u.begin(), u.end()), um(u.begin(), u.end());
  std::vector<double> sp, sm;
  for (int k = 0; k < n; ++k) {
    const double step = 1e-6 * std::max(1.0, std::fabs(u[k]));
    up[k] = u[k] + step;
    um[k] = u[k] - step;
    sp = sigma_eval(up, p);
    sm = sigma_eval(um, p);
    up[k] = u[k];
    um[k] = u[k];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        jac[(static_cast<size_t>(i) * n + j) * n + k] =
            (sp[static_cast<size_t>(i) * n + j] - sm[static_cast<size_t>(i) * n + j]) / (2.0 * step);
  }
  return jac;
}

/// Ito-Stratonovich correction drift c_i = (1/2) sum_{j,k} dsigma_ij/du_k sigma_kj.
/// For the built-in diagonal law this collapses to (1/2) sigma_i'(u_i) sigma_i(u_i).
inline std::vector<double> stratonovich_correction(std::span<const double> u, const ModelParams& p) {
  const int n = p.n;
  std::vector<double> c(n, 0.0);
  if (!p.custom_sigma) {
    for (int i = 0; i < n; ++i)
      c[i] = 0.5 * sigma_builtin_deriv(u[i], p) * sigma_builtin(u[i], p);
    return c;
  }
  const auto sig = sigma_eval(u, p);
  const auto jac = sigma_jacobian(u, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        c[i] += 0.5 * jac[(static_cast<size_t>(i) * n + j) * n + k] * sig[static_cast<size_t>(k) * n + j];
  return c;
}

// --- detailed balance -------------------------------------------------------

struct DetailedBalanceResult {
  bool feasible = false;
  bool disconnected = false; // pi fixed per component only
  std::vector<double> pi;
  std::vector<int> violating_cycle; // cell indices of an inconsistent cycle, if any
  std::string reason;
};

/// Solve pi_i a_ij = pi_j a_ji by spanning-tree propagation of the ratios
/// a_ij / a_ji, with a Kolmogorov consistency check on non-tree edges.
/// The result is normalized to sum to one.
inline DetailedBalanceResult detailed_balance_solve(const std::vector<std::vector<double>>& a) {
  const int n = static_cast<int>(a.size());
  DetailedBalanceResult r;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (a[i][j] < 0.0) throw DomainError("detailed_balance_solve: negative coefficient");
      if (i != j && a[i][j] > 0.0 && a[j][i] == 0.0) {
        r.reason = "one-sided coupling: a[" + std::to_string(i) + "][" + std::to_string(j) +
                   "] > 0 but a[" + std::to_string(j) + "][" + std::to_string(i) + "] = 0";
        return r;
      }
    }

  std::vector<double> pi(n, 0.0);
  std::vector<int> parent(n, -1);
  std::vector<int> component(n, -1);
  int ncomp = 0;
  for (int root = 0; root < n; ++root) {
    if (component[root] >= 0) continue;
    pi[root] = 1.0;
    component[root] = ncomp;
    std::vector<int> stack{root};
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for (int j = 0; j < n; ++j) {
        if (j == i || component[j] >= 0 || a[i][j] == 0.0) continue;
        pi[j] = pi[i] * (a[i][j] / a[j][i]);
        parent[j] = i;
        component[j] = ncomp;
        stack.push_back(j);
      }
    }
    ++ncomp;
  }
  r.disconnected = ncomp > 1;

  // Kolmogorov cycle check on every non-tree edge.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (a[i][j] == 0.0 && a[j][i] == 0.0) continue;
      const double lhs = pi[i] * a[i][j];
      const double rhs = pi[j] * a[j][i];
      if (std::fabs(lhs - rhs) > 1e-10 * std::max(1.0, std::max(std::fabs(lhs), std::fabs(rhs)))) {
        // report the cycle: j -> ... -> root path meets i -> ... -> root path
        r.violating_cycle.clear();
        for (int k = i; k >= 0; k = parent[k]) r.violating_cycle.push_back(k);
        std::vector<int> pj;
        for (int k = j; k >= 0; k = parent[k]) pj.push_back(k);
        r.violating_cycle.insert(r.violating_cycle.end(), pj.rbegin(), pj.rend());
        r.reason = "Kolmogorov cycle inconsistency on edge (" + std::to_string(i) + "," + std::to_string(j) + ")";
        return r;
      }
    }

  double total = 0.0;
  for (double v : pi) total += v;
  for (double& v : pi) v /= total;
  r.feasible = true;
  r.pi = std::move(pi);
  return r;
}

// --- assumption (A5) constant ----------------------------------------------

/// Empirical estimate of the entropy/noise interaction constant: the largest
/// of the three assumption ratios over uniform samples of (0, box_max]^n.
/// Each ratio is the assumption's left-hand term over 1 + pointwise entropy
/// density. Deterministic for a fixed seed; the running maximum extends when
/// more samples are requested.
inline double a5_constant_estimate(const ModelParams& p, double box_max, long samples,
                                   uint64_t seed = 0xa5a5a5a5ULL) {
  if (!(box_max > 0.0)) throw DomainError("a5_constant_estimate: box_max must be positive");
  if (samples < 1) throw DomainError("a5_constant_estimate: need at least one sample");
  const int n = p.n;
  UniformStream stream(seed);
  std::vector<double> u(n), logu(n);
  double best = 0.0;
  for (long s = 0; s < samples; ++s) {
    for (int i = 0; i < n; ++i) {
      double x = stream.next();
      if (x <= 0.0) x = 0.5;
      u[i] = box_max * x;
      logu[i] = std::log(u[i]);
    }
    const auto sig = sigma_eval(u, p);
    const auto jac = sigma_jacobian(u, p);
    double denom = 1.0;
    for (int i = 0; i < n; ++i) denom += p.pi[i] * entropy_summand(u[i]);

    double t1 = 0.0;
    for (int j = 0; j < n; ++j) {
      double col = 0.0;
      for (int i = 0; i < n; ++i) col += sig[static_cast<size_t>(i) * n + j] * logu[i];
      t1 = std::max(t1, col * col);
    }
    double t2 = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          t2 += jac[(static_cast<size_t>(i) * n + j) * n + k] * sig[static_cast<size_t>(j) * n + k] * logu[i];
    t2 = std::fabs(t2);
    double t3 = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double v = sig[static_cast<size_t>(i) * n + j];
        if (v != 0.0) t3 += v * v / u[j];
      }
    t3 = std::fabs(t3);

    best = std::max({best, t1 / denom, t2 / denom, t3 / denom});
  }
  return best;
}

// --- parameter validation helpers -------------------------------------------

/// Hard invariants of ModelParams; throws DomainError on violation.
inline void check_model_params(const ModelParams& p) {
  if (p.n < 1) throw DomainError("model: species count must be >= 1");
  if (static_cast<int>(p.a0.size()) != p.n || static_cast<int>(p.a.size()) != p.n ||
      static_cast<int>(p.pi.size()) != p.n)
    throw DomainError("model: coefficient sizes inconsistent with n");
  for (int i = 0; i < p.n; ++i) {
    if (p.a0[i] < 0.0) throw DomainError("model: a0 must be nonnegative");
    if (!(p.pi[i] > 0.0)) throw DomainError("model: pi must be positive");
    if (static_cast<int>(p.a[i].size()) != p.n) throw DomainError("model: a must be n x n");
    for (int j = 0; j < p.n; ++j)
      if (p.a[i][j] < 0.0) throw DomainError("model: a must be nonnegative");
  }
  if (!(p.gamma > 0.0 && p.gamma <= 1.0)) throw DomainError("model: gamma must lie in (0, 1]");
  if (p.sigma_scale < 0.0) throw DomainError("model: sigma_scale must be nonnegative");
  for (int i = 0; i < p.n; ++i)
    for (int j = 0; j < p.n; ++j) {
      const double lhs = p.pi[i] * p.a[i][j];
      const double rhs = p.pi[j] * p.a[j][i];
      if (std::fabs(lhs - rhs) > 1e-12 * std::max(1.0, std::fabs(lhs)))
        throw DomainError("model: detailed balance violated at (" + std::to_string(i) + "," +
                          std::to_string(j) + ")");
    }
}

} // namespace sktsim
