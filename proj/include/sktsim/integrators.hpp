#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "sktsim/grid.hpp"
#include "sktsim/model.hpp"
#include "sktsim/noise.hpp"
#include "sktsim/smallmat.hpp"

namespace sktsim {

enum class Scheme { entropy_implicit, em_ito, wong_zakai };

struct StepConfig {
  double dt = 1e-3;
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
  double blowup_R = 1e6;
  double positivity_floor = 1e-12;
  Scheme scheme = Scheme::entropy_implicit;
  int substeps_per_noise_interval = 4;
  bool stratonovich_correction_enabled = true;
};

struct TerminalStatus {
  enum class Kind { completed, stopped_at_guard, newton_failure };
  Kind kind = Kind::completed;
  double t = 0.0;
  double residual = 0.0;

  bool completed() const { return kind == Kind::completed; }
  std::string describe() const {
    switch (kind) {
      case Kind::completed: return "Completed";
      case Kind::stopped_at_guard: return "StoppedAtGuard(t=" + std::to_string(t) + ")";
      default: return "NewtonFailure(t=" + std::to_string(t) + ")";
    }
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<SpeciesFields> states;
  std::vector<long> clamp_counts; // cumulative noise-substep clamps per snapshot
  TerminalStatus terminal;
};

/// Semi-implicit stepper: backward Euler in the diffusion flux, Newton
/// iteration on the entropy variables w with u = exp(w/pi), which keeps every
/// iterate strictly positive. Buffers are reused across steps of one path.
class ImplicitStepper {
public:
  ImplicitStepper(const Grid& grid, const ModelParams& params, const StepConfig& cfg)
      : g_(grid), p_(params), cfg_(cfg), n_(params.n), cells_(grid.cells()),
        N_(static_cast<size_t>(params.n) * grid.cells()) {
    w_.resize(N_);
    w_trial_.resize(N_);
    u_a_.resize(N_);
    u_b_.resize(N_);
    res_a_.resize(N_);
    res_b_.resize(N_);
    delta_.resize(N_);
    fbuf_.resize(N_);
    lapbuf_.resize(N_);
    blocks_.resize(static_cast<size_t>(cells_) * n_ * n_);
    dscale_.resize(N_);
    nbrs_.resize(cells_);
    for (int iy = 0; iy < g_.shape[1]; ++iy)
      for (int ix = 0; ix < g_.shape[0]; ++ix)
        nbrs_[g_.index(ix, iy)] = stencil_neighbors(g_, ix, iy);
    up_.resize(n_);
    fp_.resize(n_);
    tmpm_.resize(static_cast<size_t>(n_) * n_);
    tmpv_.resize(n_);
    col_.resize(n_);
    sol_.resize(n_);
    piv_.resize(n_);
    if (g_.dims == 1) {
      gamma_blk_.resize(static_cast<size_t>(cells_) * n_ * n_);
      yvec_.resize(N_);
    } else {
      for (auto* v : {&cg_r_, &cg_rhat_, &cg_v_, &cg_p_, &cg_phat_, &cg_s_, &cg_shat_, &cg_t_})
        v->resize(N_);
      lu_.resize(static_cast<size_t>(cells_) * n_ * n_);
      lupiv_.resize(static_cast<size_t>(cells_) * n_);
    }
  }

  int species() const { return n_; }
  int cells() const { return cells_; }
  const Grid& grid() const { return g_; }

  /// One backward-Euler solve of (u+ - u)/dt = Lap F(u+) + source, with
  /// automatic dt halving (up to 10 levels) on Newton failure. `source` may be
  /// empty. Returns false if Newton still fails at the finest level.
  bool substep(std::span<const double> u_in, std::span<const double> source, double dt,
               std::span<double> u_out, int depth = 0) {
    if (newton_attempt(u_in, source, dt, u_out)) return true;
    if (depth >= 10) return false;
    std::vector<double> mid(N_);
    return substep(u_in, source, 0.5 * dt, mid, depth + 1) &&
           substep(mid, source, 0.5 * dt, u_out, depth + 1);
  }

  /// Pointwise noise kick u* = u + sigma(u) dW followed by clamping negatives
  /// to zero. Returns the number of clamped entries.
  long apply_noise(std::span<double> u, std::span<const double> dW) {
    long clamps = 0;
    if (!p_.custom_sigma) {
      for (int i = 0; i < n_; ++i) {
        double* ui = u.data() + static_cast<size_t>(i) * cells_;
        const double dw = dW[i];
        for (int c = 0; c < cells_; ++c) {
          double v = ui[c] + sigma_builtin(ui[c], p_) * dw;
          if (v < 0.0) { v = 0.0; ++clamps; }
          ui[c] = v;
        }
      }
      return clamps;
    }
    std::vector<double> uc(n_), sig;
    for (int c = 0; c < cells_; ++c) {
      for (int i = 0; i < n_; ++i) uc[i] = u[static_cast<size_t>(i) * cells_ + c];
      sig = sigma_eval(uc, p_);
      for (int i = 0; i < n_; ++i) {
        double v = uc[i];
        for (int j = 0; j < n_; ++j) v += sig[static_cast<size_t>(i) * n_ + j] * dW[j];
        if (v < 0.0) { v = 0.0; ++clamps; }
        u[static_cast<size_t>(i) * cells_ + c] = v;
      }
    }
    return clamps;
  }

  /// Wong-Zakai forcing sigma(u) * slope - correction(u), freshly evaluated at u.
  void wz_source(std::span<const double> u, std::span<const double> slope, std::span<double> src) {
    if (!p_.custom_sigma) {
      for (int i = 0; i < n_; ++i) {
        const double* ui = u.data() + static_cast<size_t>(i) * cells_;
        double* si = src.data() + static_cast<size_t>(i) * cells_;
        for (int c = 0; c < cells_; ++c) {
          const double s = sigma_builtin(ui[c], p_);
          double v = s * slope[i];
          if (cfg_.stratonovich_correction_enabled)
            v -= 0.5 * sigma_builtin_deriv(ui[c], p_) * s;
          si[c] = v;
        }
      }
      return;
    }
    std::vector<double> uc(n_), sig, corr;
    for (int c = 0; c < cells_; ++c) {
      for (int i = 0; i < n_; ++i) uc[i] = u[static_cast<size_t>(i) * cells_ + c];
      sig = sigma_eval(uc, p_);
      corr = cfg_.stratonovich_correction_enabled ? stratonovich_correction(uc, p_)
                                                  : std::vector<double>(n_, 0.0);
      for (int i = 0; i < n_; ++i) {
        double v = -corr[i];
        for (int j = 0; j < n_; ++j) v += sig[static_cast<size_t>(i) * n_ + j] * slope[j];
        src[static_cast<size_t>(i) * cells_ + c] = v;
      }
    }
  }

  double last_residual() const { return last_residual_; }

  double l2_norm_flat(std::span<const double> u) const {
    double s = 0.0;
    for (double x : u) s += x * x;
    return std::sqrt(s * g_.cell_volume());
  }

private:
  // Residual R(w) = u(w) - u_in - dt (Lap F(u(w)) + source); also writes u(w).
  double residual(std::span<const double> w, std::span<const double> u_in,
                  std::span<const double> source, double dt, std::span<double> u_of_w,
                  std::span<double> R) {
    for (int i = 0; i < n_; ++i) {
      const double inv_pi = 1.0 / p_.pi[i];
      const double* wi = w.data() + static_cast<size_t>(i) * cells_;
      double* ui = u_of_w.data() + static_cast<size_t>(i) * cells_;
      for (int c = 0; c < cells_; ++c) ui[c] = std::exp(wi[c] * inv_pi);
    }
    for (int c = 0; c < cells_; ++c) {
      for (int i = 0; i < n_; ++i) up_[i] = u_of_w[static_cast<size_t>(i) * cells_ + c];
      flux_point(up_, p_, fp_);
      for (int i = 0; i < n_; ++i) fbuf_[static_cast<size_t>(i) * cells_ + c] = fp_[i];
    }
    double sum = 0.0;
    for (int i = 0; i < n_; ++i) {
      const size_t off = static_cast<size_t>(i) * cells_;
      laplacian_neumann_into(g_, std::span<const double>(fbuf_).subspan(off, cells_),
                             std::span<double>(lapbuf_).subspan(off, cells_));
      for (int c = 0; c < cells_; ++c) {
        double r = u_of_w[off + c] - u_in[off + c] - dt * lapbuf_[off + c];
        if (!source.empty()) r -= dt * source[off + c];
        R[off + c] = r;
        sum += r * r;
      }
    }
    return std::sqrt(sum * g_.cell_volume());
  }

  // Per-cell blocks M_c = A(u_c) * diag(u_c / pi) and the diagonal scaling.
  void assemble_blocks(std::span<const double> u) {
    for (int c = 0; c < cells_; ++c) {
      for (int i = 0; i < n_; ++i) up_[i] = u[static_cast<size_t>(i) * cells_ + c];
      double* blk = blocks_.data() + static_cast<size_t>(c) * n_ * n_;
      for (int i = 0; i < n_; ++i) {
        double diag = p_.a0[i];
        for (int k = 0; k < n_; ++k) diag += p_.a[i][k] * up_[k];
        for (int j = 0; j < n_; ++j) {
          double v = p_.a[i][j] * up_[i];
          if (i == j) v += diag;
          blk[static_cast<size_t>(i) * n_ + j] = v * (up_[j] / p_.pi[j]);
        }
      }
      for (int i = 0; i < n_; ++i)
        dscale_[static_cast<size_t>(i) * cells_ + c] = up_[i] / p_.pi[i];
    }
  }

  bool newton_attempt(std::span<const double> u_in, std::span<const double> source, double dt,
                      std::span<double> u_out) {
    // Initial guess: explicit predictor in the (non-stiff) source term, plain
    // log state otherwise. Diffusion stays fully implicit either way.
    for (int i = 0; i < n_; ++i) {
      const size_t off = static_cast<size_t>(i) * cells_;
      for (int c = 0; c < cells_; ++c) {
        double guess = u_in[off + c];
        if (!source.empty()) guess += dt * source[off + c];
        w_[off + c] = p_.pi[i] * std::log(std::max(guess, cfg_.positivity_floor));
      }
    }
    double res = residual(w_, u_in, source, dt, u_a_, res_a_);
    bool converged = res <= cfg_.newton_tol;
    for (int it = 0; it < cfg_.newton_max_iter && !converged; ++it) {
      assemble_blocks(u_a_);
      bool solved = (g_.dims == 1) ? solve_tridiag(dt) : solve_bicgstab(dt);
      if (!solved) break;
      bool accepted = false;
      double lambda = 1.0;
      for (int ls = 0; ls < 12; ++ls) {
        for (size_t q = 0; q < N_; ++q) w_trial_[q] = w_[q] + lambda * delta_[q];
        const double res_t = residual(w_trial_, u_in, source, dt, u_b_, res_b_);
        if (res_t < res) {
          res = res_t;
          w_.swap(w_trial_);
          u_a_.swap(u_b_);
          res_a_.swap(res_b_);
          accepted = true;
          break;
        }
        lambda *= 0.5;
      }
      if (!accepted) break;
      converged = res <= cfg_.newton_tol;
    }
    last_residual_ = res;
    if (!converged) return false;

    std::copy(u_a_.begin(), u_a_.end(), u_out.begin());
    // Restore the exact discrete mass balance; the Newton tolerance would
    // otherwise let mass drift accumulate over many steps.
    for (int i = 0; i < n_; ++i) {
      const size_t off = static_cast<size_t>(i) * cells_;
      double target = 0.0, cur = 0.0;
      for (int c = 0; c < cells_; ++c) {
        target += u_in[off + c];
        cur += u_out[off + c];
      }
      if (!source.empty()) {
        double srcsum = 0.0;
        for (int c = 0; c < cells_; ++c) srcsum += source[off + c];
        target += dt * srcsum;
      }
      if (target > 0.0 && cur > 0.0) {
        const double f = target / cur;
        for (int c = 0; c < cells_; ++c) u_out[off + c] *= f;
      }
    }
    for (size_t q = 0; q < N_; ++q) u_out[q] = std::max(u_out[q], cfg_.positivity_floor);
    return true;
  }

  // Newton system (D - dt Lap o M) delta = -R in 1D: block tridiagonal Thomas
  // elimination with n x n blocks. M_c and D_c come from assemble_blocks.
  bool solve_tridiag(double dt) {
    const int nx = cells_;
    const double ih2 = 1.0 / (g_.h * g_.h);
    auto blk = [&](int c) { return blocks_.data() + static_cast<size_t>(c) * n_ * n_; };
    auto gam = [&](int c) { return gamma_blk_.data() + static_cast<size_t>(c) * n_ * n_; };
    for (int c = 0; c < nx; ++c) {
      // denom = B_c - L_c * Gamma_{c-1}, with B_c = D_c + dt*(nbrs/h^2)*M_c and
      // L_c = -dt/h^2 * M_{c-1}.
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) {
          double v = dt * nbrs_[c] * ih2 * blk(c)[static_cast<size_t>(i) * n_ + j];
          if (i == j) v += dscale_[static_cast<size_t>(i) * cells_ + c];
          tmpm_[static_cast<size_t>(i) * n_ + j] = v;
        }
      for (int i = 0; i < n_; ++i) tmpv_[i] = -res_a_[static_cast<size_t>(i) * cells_ + c];
      if (c > 0) {
        // tmpm -= L_c * Gamma_{c-1};  tmpv -= L_c * y_{c-1}
        const double* mprev = blk(c - 1);
        const double* gprev = gam(c - 1);
        for (int i = 0; i < n_; ++i) {
          for (int j = 0; j < n_; ++j) {
            double s = 0.0;
            for (int k = 0; k < n_; ++k) s += mprev[static_cast<size_t>(i) * n_ + k] * gprev[static_cast<size_t>(k) * n_ + j];
            tmpm_[static_cast<size_t>(i) * n_ + j] += dt * ih2 * s;
          }
          double s = 0.0;
          for (int k = 0; k < n_; ++k) s += mprev[static_cast<size_t>(i) * n_ + k] * yvec_[static_cast<size_t>(k) * cells_ + (c - 1)];
          tmpv_[i] += dt * ih2 * s;
        }
      }
      if (!lu_factor(tmpm_, n_, piv_)) return false;
      if (c < nx - 1) {
        // Gamma_c = denom^{-1} U_c with U_c = -dt/h^2 * M_{c+1}
        const double* mnext = blk(c + 1);
        double* gc = gam(c);
        for (int j = 0; j < n_; ++j) {
          for (int i = 0; i < n_; ++i) col_[i] = -dt * ih2 * mnext[static_cast<size_t>(i) * n_ + j];
          lu_solve(tmpm_, n_, piv_, col_, sol_);
          for (int i = 0; i < n_; ++i) gc[static_cast<size_t>(i) * n_ + j] = sol_[i];
        }
      }
      lu_solve(tmpm_, n_, piv_, tmpv_, sol_);
      for (int i = 0; i < n_; ++i) yvec_[static_cast<size_t>(i) * cells_ + c] = sol_[i];
    }
    for (int i = 0; i < n_; ++i)
      delta_[static_cast<size_t>(i) * cells_ + (nx - 1)] = yvec_[static_cast<size_t>(i) * cells_ + (nx - 1)];
    for (int c = nx - 2; c >= 0; --c) {
      const double* gc = gam(c);
      for (int i = 0; i < n_; ++i) {
        double s = 0.0;
        for (int k = 0; k < n_; ++k) s += gc[static_cast<size_t>(i) * n_ + k] * delta_[static_cast<size_t>(k) * cells_ + (c + 1)];
        delta_[static_cast<size_t>(i) * cells_ + c] = yvec_[static_cast<size_t>(i) * cells_ + c] - s;
      }
    }
    return true;
  }

  // Matrix-free Newton operator for the 2D path: v -> D v - dt Lap(M v),
  // using M = A(u) diag(u/pi) from assemble_blocks.
  void apply_operator(std::span<const double> v, std::span<double> out, double dt) {
    for (int c = 0; c < cells_; ++c) {
      const double* blkc = blocks_.data() + static_cast<size_t>(c) * n_ * n_;
      for (int i = 0; i < n_; ++i) {
        double s = 0.0;
        for (int j = 0; j < n_; ++j) s += blkc[static_cast<size_t>(i) * n_ + j] * v[static_cast<size_t>(j) * cells_ + c];
        fbuf_[static_cast<size_t>(i) * cells_ + c] = s;
      }
    }
    for (int i = 0; i < n_; ++i) {
      const size_t off = static_cast<size_t>(i) * cells_;
      laplacian_neumann_into(g_, std::span<const double>(fbuf_).subspan(off, cells_),
                             std::span<double>(lapbuf_).subspan(off, cells_));
      for (int c = 0; c < cells_; ++c) out[off + c] = dscale_[off + c] * v[off + c] - dt * lapbuf_[off + c];
    }
  }

  bool solve_bicgstab(double dt) {
    // Block-Jacobi preconditioner: per-cell B_c = D_c + dt*(nbrs/h^2)*M_c.
    const double ih2 = 1.0 / (g_.h * g_.h);
    for (int c = 0; c < cells_; ++c) {
      double* lu = lu_.data() + static_cast<size_t>(c) * n_ * n_;
      const double* blkc = blocks_.data() + static_cast<size_t>(c) * n_ * n_;
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) {
          double v = dt * nbrs_[c] * ih2 * blkc[static_cast<size_t>(i) * n_ + j];
          if (i == j) v += dscale_[static_cast<size_t>(i) * cells_ + c];
          lu[static_cast<size_t>(i) * n_ + j] = v;
        }
      if (!lu_factor(std::span<double>(lu, static_cast<size_t>(n_) * n_), n_,
                     std::span<int>(lupiv_.data() + static_cast<size_t>(c) * n_, n_)))
        return false;
    }
    auto precond = [&](std::span<const double> r, std::span<double> z) {
      for (int c = 0; c < cells_; ++c) {
        for (int i = 0; i < n_; ++i) col_[i] = r[static_cast<size_t>(i) * cells_ + c];
        lu_solve(std::span<const double>(lu_.data() + static_cast<size_t>(c) * n_ * n_,
                                         static_cast<size_t>(n_) * n_),
                 n_, std::span<const int>(lupiv_.data() + static_cast<size_t>(c) * n_, n_), col_, sol_);
        for (int i = 0; i < n_; ++i) z[static_cast<size_t>(i) * cells_ + c] = sol_[i];
      }
    };
    auto dot = [&](std::span<const double> a, std::span<const double> b) {
      double s = 0.0;
      for (size_t q = 0; q < N_; ++q) s += a[q] * b[q];
      return s;
    };

    const double tol = 0.01 * cfg_.newton_tol / std::sqrt(g_.cell_volume());
    std::fill(delta_.begin(), delta_.end(), 0.0);
    for (size_t q = 0; q < N_; ++q) cg_r_[q] = -res_a_[q];
    double rnorm = std::sqrt(dot(cg_r_, cg_r_));
    if (rnorm <= tol) return true;
    cg_rhat_ = cg_r_;
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    std::fill(cg_v_.begin(), cg_v_.end(), 0.0);
    std::fill(cg_p_.begin(), cg_p_.end(), 0.0);
    for (int it = 0; it < 600; ++it) {
      const double rho1 = dot(cg_rhat_, cg_r_);
      if (rho1 == 0.0 || !std::isfinite(rho1)) return false;
      const double beta = (rho1 / rho) * (alpha / omega);
      for (size_t q = 0; q < N_; ++q) cg_p_[q] = cg_r_[q] + beta * (cg_p_[q] - omega * cg_v_[q]);
      precond(cg_p_, cg_phat_);
      apply_operator(cg_phat_, cg_v_, dt);
      const double rhv = dot(cg_rhat_, cg_v_);
      if (rhv == 0.0 || !std::isfinite(rhv)) return false;
      alpha = rho1 / rhv;
      for (size_t q = 0; q < N_; ++q) cg_s_[q] = cg_r_[q] - alpha * cg_v_[q];
      if (std::sqrt(dot(cg_s_, cg_s_)) <= tol) {
        for (size_t q = 0; q < N_; ++q) delta_[q] += alpha * cg_phat_[q];
        return true;
      }
      precond(cg_s_, cg_shat_);
      apply_operator(cg_shat_, cg_t_, dt);
      const double tt = dot(cg_t_, cg_t_);
      if (tt == 0.0 || !std::isfinite(tt)) return false;
      omega = dot(cg_t_, cg_s_) / tt;
      for (size_t q = 0; q < N_; ++q) {
        delta_[q] += alpha * cg_phat_[q] + omega * cg_shat_[q];
        cg_r_[q] = cg_s_[q] - omega * cg_t_[q];
      }
      if (std::sqrt(dot(cg_r_, cg_r_)) <= tol) return true;
      if (omega == 0.0) return false;
      rho = rho1;
    }
    return false;
  }

  Grid g_;
  ModelParams p_;
  StepConfig cfg_;
  int n_;
  int cells_;
  size_t N_;
  double last_residual_ = 0.0;

  std::vector<double> w_, w_trial_, u_a_, u_b_, res_a_, res_b_, delta_, fbuf_, lapbuf_;
  std::vector<double> blocks_, dscale_;
  std::vector<int> nbrs_;
  std::vector<double> up_, fp_, tmpm_, tmpv_, col_, sol_;
  std::vector<int> piv_;
  // 1D direct solve
  std::vector<double> gamma_blk_, yvec_;
  // 2D iterative solve
  std::vector<double> cg_r_, cg_rhat_, cg_v_, cg_p_, cg_phat_, cg_s_, cg_shat_, cg_t_;
  std::vector<double> lu_;
  std::vector<int> lupiv_;
};

// --- flat/field conversions ---------------------------------------------------

inline std::vector<double> fields_to_flat(const SpeciesFields& u) {
  std::vector<double> flat(static_cast<size_t>(u.n) * u.grid.cells());
  for (int i = 0; i < u.n; ++i)
    std::copy(u.data[i].begin(), u.data[i].end(), flat.begin() + static_cast<size_t>(i) * u.grid.cells());
  return flat;
}

inline SpeciesFields flat_to_fields(const Grid& g, int n, std::span<const double> flat) {
  SpeciesFields u(g, n);
  for (int i = 0; i < n; ++i)
    std::copy(flat.begin() + static_cast<size_t>(i) * g.cells(),
              flat.begin() + static_cast<size_t>(i + 1) * g.cells(), u.data[i].begin());
  return u;
}

// --- single-step public operations --------------------------------------------

struct StepResult {
  SpeciesFields u;
  bool ok = true;
  double residual = 0.0;
  long clamp_events = 0;
};

/// Backward-Euler flux solve as a standalone operation.
inline StepResult deterministic_substep(const SpeciesFields& u, const SpeciesFields& source,
                                        double dt, const ModelParams& params, const StepConfig& cfg) {
  if (!(dt > 0.0)) throw DomainError("deterministic_substep: dt must be positive");
  ImplicitStepper stepper(u.grid, params, cfg);
  auto flat = fields_to_flat(u);
  std::vector<double> src = fields_to_flat(source);
  std::vector<double> out(flat.size());
  StepResult r;
  r.ok = stepper.substep(flat, src, dt, out);
  r.residual = stepper.last_residual();
  r.u = r.ok ? flat_to_fields(u.grid, u.n, out) : u;
  return r;
}

inline StepResult deterministic_substep(const SpeciesFields& u, double dt,
                                        const ModelParams& params, const StepConfig& cfg) {
  return deterministic_substep(u, SpeciesFields(u.grid, u.n, 0.0), dt, params, cfg);
}

/// Lie splitting Euler-Maruyama step: pointwise Ito noise kick (clamped at
/// zero), then one implicit diffusion substep.
inline StepResult em_ito_step(const SpeciesFields& u, std::span<const double> dW, double dt,
                              const ModelParams& params, const StepConfig& cfg) {
  ImplicitStepper stepper(u.grid, params, cfg);
  auto flat = fields_to_flat(u);
  StepResult r;
  r.clamp_events = stepper.apply_noise(flat, dW);
  std::vector<double> out(flat.size());
  r.ok = stepper.substep(flat, {}, dt, out);
  r.residual = stepper.last_residual();
  r.u = r.ok ? flat_to_fields(u.grid, u.n, out) : u;
  return r;
}

/// Integrate the Wong-Zakai random ODE across noise interval k with S
/// implicit substeps; forcing (and the Ito correction drift) is refrozen at
/// each substep start.
inline StepResult wong_zakai_interval(const SpeciesFields& u, const WienerPath& path, int k,
                                      const ModelParams& params, const StepConfig& cfg) {
  ImplicitStepper stepper(u.grid, params, cfg);
  auto flat = fields_to_flat(u);
  const auto slope = wz_slope(path, k);
  const int S = std::max(1, cfg.substeps_per_noise_interval);
  const double dt = path.eta / S;
  std::vector<double> src(flat.size()), out(flat.size());
  StepResult r;
  for (int s = 0; s < S; ++s) {
    stepper.wz_source(flat, slope, src);
    if (!stepper.substep(flat, src, dt, out)) {
      r.ok = false;
      r.residual = stepper.last_residual();
      r.u = flat_to_fields(u.grid, u.n, flat);
      return r;
    }
    flat.swap(out);
  }
  r.residual = stepper.last_residual();
  r.u = flat_to_fields(u.grid, u.n, flat);
  return r;
}

// --- full path simulation ------------------------------------------------------

/// Run the configured scheme over [0, path.T], recording snapshots every
/// sample_stride outer steps plus the terminal state. The L2 blow-up guard is
/// the numerical stand-in for the exit time; non-finite states trip it too.
inline Trajectory simulate_path(const SpeciesFields& u0, const WienerPath& path,
                                const ModelParams& params, const StepConfig& cfg,
                                int sample_stride = 1) {
  if (sample_stride < 1) sample_stride = 1;
  Trajectory traj;
  ImplicitStepper stepper(u0.grid, params, cfg);
  auto flat = fields_to_flat(u0);
  long clamps = 0;

  auto snapshot = [&](double t) {
    if (!traj.times.empty() && t <= traj.times.back()) return; // keep times strictly increasing
    traj.times.push_back(t);
    traj.states.push_back(flat_to_fields(u0.grid, u0.n, flat));
    traj.clamp_counts.push_back(clamps);
  };
  auto guard_tripped = [&]() {
    for (double x : flat)
      if (!std::isfinite(x)) return true;
    return stepper.l2_norm_flat(flat) > cfg.blowup_R;
  };

  snapshot(0.0);
  if (guard_tripped()) {
    traj.terminal = {TerminalStatus::Kind::stopped_at_guard, 0.0, 0.0};
    return traj;
  }

  std::vector<double> out(flat.size()), src(flat.size());
  const double T = path.T;

  if (cfg.scheme == Scheme::entropy_implicit) {
    const double dt = cfg.dt;
    const long nsteps = static_cast<long>(std::ceil(T / dt - 1e-12));
    if (nsteps == 0) {
      traj.terminal = {TerminalStatus::Kind::completed, 0.0, 0.0};
      return traj;
    }
    double t = 0.0;
    for (long k = 0; k < nsteps; ++k) {
      const double step_dt = std::min(dt, T - t);
      if (step_dt <= 0.0) break;
      if (!stepper.substep(flat, {}, step_dt, out)) {
        traj.terminal = {TerminalStatus::Kind::newton_failure, t, stepper.last_residual()};
        snapshot(t);
        return traj;
      }
      flat.swap(out);
      t += step_dt;
      if (guard_tripped()) {
        snapshot(t);
        traj.terminal = {TerminalStatus::Kind::stopped_at_guard, t, 0.0};
        return traj;
      }
      if ((k + 1) % sample_stride == 0 && k + 1 < nsteps) snapshot(t);
    }
    snapshot(T);
    traj.terminal = {TerminalStatus::Kind::completed, T, stepper.last_residual()};
    return traj;
  }

  // noise-driven schemes walk the Wong-Zakai mesh
  const int S = std::max(1, cfg.substeps_per_noise_interval);
  std::vector<double> dW(path.n);
  for (int k = 0; k < path.M; ++k) {
    const double t_next = (k + 1 == path.M) ? T : path.time(k + 1);
    bool ok = true;
    if (cfg.scheme == Scheme::em_ito) {
      for (int j = 0; j < path.n; ++j) dW[j] = path.increment(k, j);
      clamps += stepper.apply_noise(flat, dW);
      ok = stepper.substep(flat, {}, path.eta, out);
      if (ok) flat.swap(out);
    } else {
      const auto slope = wz_slope(path, k);
      const double dt = path.eta / S;
      for (int s = 0; s < S && ok; ++s) {
        stepper.wz_source(flat, slope, src);
        ok = stepper.substep(flat, src, dt, out);
        if (ok) flat.swap(out);
      }
    }
    if (!ok) {
      traj.terminal = {TerminalStatus::Kind::newton_failure, path.time(k), stepper.last_residual()};
      snapshot(path.time(k));
      return traj;
    }
    if (guard_tripped()) {
      snapshot(t_next);
      traj.terminal = {TerminalStatus::Kind::stopped_at_guard, t_next, 0.0};
      return traj;
    }
    if ((k + 1) % sample_stride == 0 && k + 1 < path.M) snapshot(t_next);
  }
  snapshot(T);
  traj.terminal = {TerminalStatus::Kind::completed, T, stepper.last_residual()};
  return traj;
}

} // namespace sktsim
