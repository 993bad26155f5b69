#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <thread>
#include <vector>

#include "sktsim/config.hpp"
#include "sktsim/diagnostics.hpp"
#include "sktsim/ensemble.hpp"
#include "sktsim/integrators.hpp"
#include "sktsim/io.hpp"
#include "sktsim/noise.hpp"

namespace sktsim {

// process exit codes: 0 ok, 2 config, 3 numerical failure, 4 guard stopped all
inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 2;
inline constexpr int exit_numerical = 3;
inline constexpr int exit_guard = 4;

struct RunOptions {
  std::filesystem::path out_dir;
  std::optional<uint64_t> seed_override;
  int threads = 1;
};

inline uint64_t effective_seed(const RunConfig& cfg, const RunOptions& opts) {
  return opts.seed_override.value_or(cfg.ensemble.base_seed);
}

inline OutputHeader make_header(const RunConfig& cfg, uint64_t seed) {
  OutputHeader h;
  h.config_hash = config_hash(cfg.raw);
  h.base_seed = seed;
  return h;
}

/// Writes the config back with the solved reversible measure filled in, so a
/// run directory is self-describing.
inline void write_resolved_config(const RunConfig& cfg, const std::filesystem::path& dir) {
  nlohmann::json j = cfg.raw;
  j["model"]["pi"] = cfg.model.pi;
  std::ofstream f(dir / "config_resolved.json", std::ios::binary | std::ios::trunc);
  f << j.dump(2) << "\n";
}

inline int run_validate(const RunConfig& cfg, std::ostream& log) {
  const auto rep = validate_model(cfg);
  log << rep.summary();
  return rep.ok() ? exit_ok : exit_config;
}

inline int run_simulate(const RunConfig& cfg, const RunOptions& opts, std::ostream& log) {
  const auto rep = validate_model(cfg);
  if (!rep.ok()) {
    log << rep.summary();
    return exit_config;
  }
  const uint64_t seed = effective_seed(cfg, opts);
  const SpeciesFields u0 = build_initial(cfg);
  const OutputHeader header = make_header(cfg, seed);
  std::filesystem::path dir = opts.out_dir.empty() ? std::filesystem::path(cfg.output.directory) : opts.out_dir;
  std::filesystem::create_directories(dir);
  write_resolved_config(cfg, dir);

  std::vector<DiagnosticsRecord> records;
  TerminalStatus terminal;
  if (cfg.T <= 0.0) {
    records.push_back(record(u0, 0.0, cfg.model));
  } else {
    const int M = std::max(1, static_cast<int>(std::lround(cfg.T / cfg.eta)));
    const WienerPath path = sample_path(derive_stream_seed(seed, 0), cfg.model.n, cfg.T, M);
    if (cfg.output.dump_path) write_path_ndjson(path, dir / "wiener_path.ndjson");
    const Trajectory traj = simulate_path(u0, path, cfg.model, cfg.step, cfg.output.stride);
    terminal = traj.terminal;
    for (size_t k = 0; k < traj.states.size(); ++k)
      records.push_back(record(traj.states[k], traj.times[k], cfg.model, traj.clamp_counts[k]));
  }

  for (const auto& fmt : cfg.output.formats) {
    if (fmt == "ndjson") write_records_ndjson(records, dir / "diagnostics.ndjson", header);
    else if (fmt == "csv") write_records_csv(records, dir / "diagnostics.csv", header);
    else throw ConfigRejected("unknown output format: " + fmt);
  }
  log << "simulate: " << records.size() << " records, terminal " << terminal.describe() << "\n";
  if (terminal.kind == TerminalStatus::Kind::newton_failure) return exit_numerical;
  if (terminal.kind == TerminalStatus::Kind::stopped_at_guard) return exit_guard;
  return exit_ok;
}

inline int run_ensemble_cmd(const RunConfig& cfg, const RunOptions& opts, std::ostream& log) {
  const auto rep = validate_model(cfg);
  if (!rep.ok()) {
    log << rep.summary();
    return exit_config;
  }
  const uint64_t seed = effective_seed(cfg, opts);
  const SpeciesFields u0 = build_initial(cfg);
  const OutputHeader header = make_header(cfg, seed);
  std::filesystem::path dir = opts.out_dir.empty() ? std::filesystem::path(cfg.output.directory) : opts.out_dir;
  std::filesystem::create_directories(dir);
  write_resolved_config(cfg, dir);

  std::vector<FunctionalSpec> specs = cfg.ensemble.functionals;
  if (specs.empty()) specs.push_back({"terminal_state_mean", -1.0, 1.0, ""});
  const int M = std::max(1, static_cast<int>(std::lround(cfg.T / cfg.eta)));

  EnsembleResult res;
  try {
    res = run_ensemble(u0, cfg.model, cfg.step, cfg.T, M, cfg.ensemble.m_paths, seed, specs,
                       opts.threads, cfg.output.stride);
  } catch (const EnsembleDegenerate& e) {
    log << "ensemble degenerate: " << e.what() << "\n";
    return exit_guard;
  }

  write_stats_ndjson(res.stats, dir / "ensemble_stats.ndjson", header);
  log << "functional                              m      mean          ci95          stopped\n";
  for (const auto& s : res.stats) {
    log << std::left << std::setw(40) << s.functional_name << std::setw(7) << s.m_paths
        << std::setw(14) << s.mean << std::setw(14) << s.ci95_halfwidth << s.stopped_fraction
        << "\n";
  }
  return exit_ok;
}

// --- closed-form oracles for the homogeneous reduction ---------------------------

/// With gamma = 1 the built-in law is sigma(u) = s*u/2, so a spatially
/// constant state follows dX_i = (s/2) X_i dW_i with Ito solution
/// X_i = u0_i exp((s/2) W_i - (s^2/8) t) and Stratonovich solution
/// X_i = u0_i exp((s/2) W_i).
inline double gbm_ito_oracle(double u0, double scale, double W, double t) {
  return u0 * std::exp(0.5 * scale * W - 0.125 * scale * scale * t);
}

inline double gbm_stratonovich_oracle(double u0, double scale, double W) {
  return u0 * std::exp(0.5 * scale * W);
}

inline void require_homogeneous_gbm(const RunConfig& cfg) {
  if (cfg.model.gamma != 1.0)
    throw ConfigRejected("convergence study needs gamma = 1 for the closed-form oracle");
  if (cfg.initial.kind != InitialConfig::Kind::constant)
    throw ConfigRejected("convergence study needs spatially constant initial data");
  if (cfg.model.custom_sigma)
    throw ConfigRejected("convergence study needs the built-in noise law");
}

inline double fit_slope_log2(const std::vector<double>& x_log2, const std::vector<double>& y) {
  const size_t n = x_log2.size();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (size_t k = 0; k < n; ++k) {
    const double yl = std::log2(y[k]);
    sx += x_log2[k];
    sy += yl;
    sxx += x_log2[k] * x_log2[k];
    sxy += x_log2[k] * yl;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct StrongErrorRow {
  int eta_exponent = 0;
  double eta = 0.0;
  double rms = 0.0;        // vs the Ito oracle (corrected schemes)
  double mean_ratio = 0.0; // uncorrected WZ vs the Stratonovich oracle
};

struct StrongErrorTable {
  std::string study;
  std::vector<StrongErrorRow> rows;
  double slope = 0.0;
};

/// Shared-path strong error study. Paths are sampled on the finest mesh and
/// coarsened, so every level sees the same Brownian motion.
inline StrongErrorTable em_order_study(const RunConfig& cfg, uint64_t seed, int threads) {
  require_homogeneous_gbm(cfg);
  StrongErrorTable table;
  table.study = "em_order";
  const auto& exps = cfg.convergence.eta_exponents;
  const int finest = *std::max_element(exps.begin(), exps.end());
  const int Mfine = 1 << finest;
  const int npaths = cfg.convergence.m_paths;
  const int n = cfg.model.n;
  const SpeciesFields u0 = build_initial(cfg);
  const double T = cfg.T;

  StepConfig step = cfg.step;
  step.scheme = Scheme::em_ito;

  std::vector<double> sq_err(exps.size() * npaths, 0.0);
  std::atomic<int> counter{0};
  auto worker = [&]() {
    for (;;) {
      const int k = counter.fetch_add(1);
      if (k >= npaths) return;
      const WienerPath fine = sample_path(derive_stream_seed(seed, k), n, T, Mfine);
      for (size_t lev = 0; lev < exps.size(); ++lev) {
        const WienerPath path = coarsen_path(fine, Mfine >> exps[lev]);
        const Trajectory traj = simulate_path(u0, path, cfg.model, step, path.M);
        const auto& uT = traj.states.back();
        double err2 = 0.0;
        for (int i = 0; i < n; ++i) {
          const double xhat = integrate(uT.grid, uT.data[i]) / uT.grid.volume();
          const double x = gbm_ito_oracle(cfg.initial.values[i], cfg.model.sigma_scale,
                                          fine.node(fine.M, i), T);
          err2 += (xhat - x) * (xhat - x);
        }
        sq_err[lev * npaths + k] = err2 / n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::max(1, threads); ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  std::vector<double> xs, rms;
  for (size_t lev = 0; lev < exps.size(); ++lev) {
    double s = 0.0;
    for (int k = 0; k < npaths; ++k) s += sq_err[lev * npaths + k];
    StrongErrorRow row;
    row.eta_exponent = exps[lev];
    row.eta = T / (1 << exps[lev]);
    row.rms = std::sqrt(s / npaths);
    table.rows.push_back(row);
    xs.push_back(-static_cast<double>(exps[lev]));
    rms.push_back(row.rms);
  }
  table.slope = fit_slope_log2(xs, rms);
  return table;
}

/// Wong-Zakai vs Ito: corrected RMS against the Ito oracle and uncorrected
/// path-wise mean ratio against the Stratonovich oracle, per eta level.
inline StrongErrorTable wz_ito_study(const RunConfig& cfg, uint64_t seed, int threads) {
  require_homogeneous_gbm(cfg);
  StrongErrorTable table;
  table.study = "wz_ito";
  const auto& exps = cfg.convergence.eta_exponents;
  const int finest = *std::max_element(exps.begin(), exps.end());
  const int Mfine = 1 << finest;
  const int npaths = cfg.convergence.m_paths;
  const int n = cfg.model.n;
  const SpeciesFields u0 = build_initial(cfg);
  const double T = cfg.T;

  StepConfig corrected = cfg.step;
  corrected.scheme = Scheme::wong_zakai;
  corrected.substeps_per_noise_interval = cfg.convergence.substeps;
  corrected.stratonovich_correction_enabled = true;
  StepConfig uncorrected = corrected;
  uncorrected.stratonovich_correction_enabled = false;

  // the uncorrected variant is assessed at the finest level unless the full
  // table was requested; its limit is the Stratonovich solution, so the
  // interesting comparison is at small eta
  size_t finest_idx = 0;
  for (size_t lev = 1; lev < exps.size(); ++lev)
    if (exps[lev] > exps[finest_idx]) finest_idx = lev;

  std::vector<double> sq_err(exps.size() * npaths, 0.0);
  std::vector<double> ratios(exps.size() * npaths, 0.0);
  std::atomic<int> counter{0};
  auto worker = [&]() {
    for (;;) {
      const int k = counter.fetch_add(1);
      if (k >= npaths) return;
      const WienerPath fine = sample_path(derive_stream_seed(seed, k), n, T, Mfine);
      for (size_t lev = 0; lev < exps.size(); ++lev) {
        const WienerPath path = coarsen_path(fine, Mfine >> exps[lev]);
        const Trajectory tc = simulate_path(u0, path, cfg.model, corrected, path.M);
        const auto& uc = tc.states.back();
        double err2 = 0.0;
        for (int i = 0; i < n; ++i) {
          const double xhat = integrate(uc.grid, uc.data[i]) / uc.grid.volume();
          const double x = gbm_ito_oracle(cfg.initial.values[i], cfg.model.sigma_scale,
                                          fine.node(fine.M, i), T);
          err2 += (xhat - x) * (xhat - x);
        }
        sq_err[lev * npaths + k] = err2 / n;

        if (lev != finest_idx && !cfg.convergence.uncorrected_all_levels) continue;
        const Trajectory tu = simulate_path(u0, path, cfg.model, uncorrected, path.M);
        const auto& uu = tu.states.back();
        double ratio = 0.0;
        for (int i = 0; i < n; ++i) {
          const double xhat = integrate(uu.grid, uu.data[i]) / uu.grid.volume();
          const double x = gbm_stratonovich_oracle(cfg.initial.values[i], cfg.model.sigma_scale,
                                                   fine.node(fine.M, i));
          ratio += xhat / x;
        }
        ratios[lev * npaths + k] = ratio / n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::max(1, threads); ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  std::vector<double> xs, rms;
  for (size_t lev = 0; lev < exps.size(); ++lev) {
    double s = 0.0, rsum = 0.0;
    for (int k = 0; k < npaths; ++k) {
      s += sq_err[lev * npaths + k];
      rsum += ratios[lev * npaths + k];
    }
    StrongErrorRow row;
    row.eta_exponent = exps[lev];
    row.eta = T / (1 << exps[lev]);
    row.rms = std::sqrt(s / npaths);
    row.mean_ratio = rsum / npaths;
    table.rows.push_back(row);
    xs.push_back(-static_cast<double>(exps[lev]));
    rms.push_back(row.rms);
  }
  table.slope = fit_slope_log2(xs, rms);
  return table;
}

struct GridRefinementRow {
  int cells = 0;
  double lrho1_w1rho1 = 0.0;
  double lrho2_grad_pair01 = 0.0;
  double l1p2d = 0.0;
};

struct GridRefinementTable {
  std::vector<GridRefinementRow> rows;
  double max_rel_variation_w1 = 0.0;
  double max_rel_variation_pair = 0.0;
};

/// Deterministic run per grid size; reports the Bochner norms and their
/// spread across refinements.
inline GridRefinementTable grid_refinement_study(const RunConfig& cfg) {
  GridRefinementTable table;
  StepConfig step = cfg.step;
  step.scheme = Scheme::entropy_implicit;
  for (int cells : cfg.convergence.grids) {
    RunConfig c = cfg;
    c.grid.shape[0] = cells;
    const SpeciesFields u0 = build_initial(c);
    const WienerPath path = sample_path(1, cfg.model.n, cfg.T, 1); // unused driving noise
    const Trajectory traj = simulate_path(u0, path, cfg.model, step, cfg.output.stride);
    const NormReport rep = norm_report(traj, cfg.model);
    GridRefinementRow row;
    row.cells = cells;
    row.lrho1_w1rho1 = rep.lrho1_w1rho1;
    row.l1p2d = rep.l1p2d;
    row.lrho2_grad_pair01 = rep.lrho2_grad_pair.empty() ? 0.0 : rep.lrho2_grad_pair.front();
    table.rows.push_back(row);
  }
  auto spread = [](auto&& pick, const std::vector<GridRefinementRow>& rows) {
    double lo = pick(rows.front()), hi = lo;
    for (const auto& r : rows) {
      lo = std::min(lo, pick(r));
      hi = std::max(hi, pick(r));
    }
    return lo > 0.0 ? (hi - lo) / lo : 0.0;
  };
  table.max_rel_variation_w1 = spread([](const GridRefinementRow& r) { return r.lrho1_w1rho1; }, table.rows);
  table.max_rel_variation_pair =
      spread([](const GridRefinementRow& r) { return r.lrho2_grad_pair01; }, table.rows);
  return table;
}

inline int run_convergence(const RunConfig& cfg, const RunOptions& opts, std::ostream& log) {
  const auto rep = validate_model(cfg);
  if (!rep.ok()) {
    log << rep.summary();
    return exit_config;
  }
  const uint64_t seed = effective_seed(cfg, opts);
  std::filesystem::path dir = opts.out_dir.empty() ? std::filesystem::path(cfg.output.directory) : opts.out_dir;
  std::filesystem::create_directories(dir);
  write_resolved_config(cfg, dir);
  const OutputHeader header = make_header(cfg, seed);

  const std::string& study = cfg.convergence.study;
  std::ofstream f(dir / ("convergence_" + study + ".ndjson"), std::ios::binary | std::ios::trunc);
  f << "{\"type\":\"header\",\"config_hash\":\"" << header.config_hash
    << "\",\"base_seed\":" << header.base_seed << ",\"version\":\"" << header.version << "\"}\n";

  if (study == "em_order" || study == "wz_ito") {
    const StrongErrorTable table = (study == "em_order") ? em_order_study(cfg, seed, opts.threads)
                                                         : wz_ito_study(cfg, seed, opts.threads);
    for (const auto& row : table.rows) {
      f << "{\"study\":\"" << study << "\",\"eta\":" << format_double(row.eta)
        << ",\"rms\":" << format_double(row.rms);
      if (study == "wz_ito" && row.mean_ratio != 0.0)
        f << ",\"mean_ratio_uncorrected\":" << format_double(row.mean_ratio);
      f << "}\n";
      log << study << " eta=2^-" << row.eta_exponent << " rms=" << row.rms;
      if (study == "wz_ito" && row.mean_ratio != 0.0)
        log << " mean_ratio_uncorrected=" << row.mean_ratio;
      log << "\n";
    }
    f << "{\"study\":\"" << study << "\",\"slope\":" << format_double(table.slope) << "}\n";
    log << study << " fitted slope = " << table.slope << "\n";
    return exit_ok;
  }
  if (study == "grid_refinement") {
    const GridRefinementTable table = grid_refinement_study(cfg);
    for (const auto& row : table.rows) {
      f << "{\"study\":\"grid_refinement\",\"cells\":" << row.cells
        << ",\"lrho1_w1rho1\":" << format_double(row.lrho1_w1rho1)
        << ",\"lrho2_grad_pair01\":" << format_double(row.lrho2_grad_pair01)
        << ",\"l1p2d\":" << format_double(row.l1p2d) << "}\n";
      log << "grid_refinement cells=" << row.cells << " lrho1_w1rho1=" << row.lrho1_w1rho1
          << " lrho2_grad_pair01=" << row.lrho2_grad_pair01 << "\n";
    }
    f << "{\"study\":\"grid_refinement\",\"max_rel_variation_w1\":"
      << format_double(table.max_rel_variation_w1)
      << ",\"max_rel_variation_pair\":" << format_double(table.max_rel_variation_pair) << "}\n";
    log << "grid_refinement variation w1=" << table.max_rel_variation_w1
        << " pair=" << table.max_rel_variation_pair << "\n";
    return exit_ok;
  }
  log << "unknown convergence study: " << study << "\n";
  return exit_config;
}

} // namespace sktsim
