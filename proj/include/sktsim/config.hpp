#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "sktsim/errors.hpp"
#include "sktsim/grid.hpp"
#include "sktsim/integrators.hpp"
#include "sktsim/io.hpp"
#include "sktsim/model.hpp"

namespace sktsim {

struct GridConfig {
  int dims = 1;
  std::array<int, 2> shape{64, 1};
  double extent = 1.0; // length of the first axis; h = extent / shape[0]
};

struct InitialConfig {
  enum class Kind { constant, cosine_bump, from_file } kind = Kind::constant;
  std::vector<double> values;     // constant per species
  std::vector<double> base;       // cosine bump offsets
  std::vector<double> amplitudes; // cosine bump amplitudes
  std::vector<int> modes;         // cosine bump mode numbers
  std::string path;               // from_file
};

struct EnsembleConfig {
  int m_paths = 1;
  uint64_t base_seed = 1;
  std::vector<FunctionalSpec> functionals;
};

struct OutputConfig {
  std::string directory = "out";
  int stride = 1;
  std::vector<std::string> formats{"ndjson"};
  bool dump_path = false;
};

struct ConvergenceConfig {
  std::string study = "em_order"; // em_order | wz_ito | grid_refinement
  std::vector<int> eta_exponents{4, 5, 6, 7, 8, 9, 10};
  std::vector<int> grids{32, 64, 128};
  int m_paths = 1000;
  int substeps = 4;
  bool uncorrected_all_levels = false; // wz_ito: ratio at every level, not just the finest
};

struct RunConfig {
  ModelParams model;
  GridConfig grid;
  InitialConfig initial;
  double T = 1.0;
  double eta = 0.05;
  StepConfig step;
  EnsembleConfig ensemble;
  OutputConfig output;
  ConvergenceConfig convergence;
  bool pi_was_given = false;
  bool pi_solve_failed = false;
  std::string pi_solve_reason;
  nlohmann::json raw;
};

inline Scheme parse_scheme(const std::string& s) {
  if (s == "entropy_implicit") return Scheme::entropy_implicit;
  if (s == "em_ito") return Scheme::em_ito;
  if (s == "wong_zakai") return Scheme::wong_zakai;
  if (s == "em_strang")
    throw ConfigRejected("scheme em_strang is reserved but not implemented");
  throw ConfigRejected("unknown scheme: " + s);
}

inline std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::entropy_implicit: return "entropy_implicit";
    case Scheme::em_ito: return "em_ito";
    default: return "wong_zakai";
  }
}

inline RunConfig parse_config(const nlohmann::json& j) {
  RunConfig c;
  c.raw = j;
  const auto& m = j.at("model");
  c.model.n = m.at("n").get<int>();
  c.model.a0 = m.at("a0").get<std::vector<double>>();
  c.model.a = m.at("a").get<std::vector<std::vector<double>>>();
  c.model.gamma = m.value("gamma", 1.0);
  c.model.sigma_scale = m.value("sigma_scale", 0.0);
  if (m.contains("pi")) {
    c.model.pi = m.at("pi").get<std::vector<double>>();
    c.pi_was_given = true;
  } else {
    const auto db = detailed_balance_solve(c.model.a);
    if (db.feasible) {
      c.model.pi = db.pi;
    } else {
      c.pi_solve_failed = true;
      c.pi_solve_reason = db.reason;
      c.model.pi.assign(c.model.n, 1.0 / c.model.n);
    }
  }

  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    c.grid.dims = g.value("dims", 1);
    const auto shape = g.at("shape").get<std::vector<int>>();
    c.grid.shape[0] = shape.at(0);
    c.grid.shape[1] = shape.size() > 1 ? shape[1] : 1;
    c.grid.extent = g.value("extent", 1.0);
  }

  if (j.contains("initial")) {
    const auto& init = j.at("initial");
    const std::string kind = init.value("type", "constant");
    if (kind == "constant") {
      c.initial.kind = InitialConfig::Kind::constant;
      c.initial.values = init.at("values").get<std::vector<double>>();
    } else if (kind == "cosine_bump") {
      c.initial.kind = InitialConfig::Kind::cosine_bump;
      c.initial.base = init.at("base").get<std::vector<double>>();
      c.initial.amplitudes = init.at("amplitudes").get<std::vector<double>>();
      c.initial.modes = init.at("modes").get<std::vector<int>>();
    } else if (kind == "from_file") {
      c.initial.kind = InitialConfig::Kind::from_file;
      c.initial.path = init.at("path").get<std::string>();
    } else {
      throw ConfigRejected("unknown initial type: " + kind);
    }
  }

  if (j.contains("time")) {
    const auto& t = j.at("time");
    c.T = t.value("T", 1.0);
    c.eta = t.value("eta", c.T > 0.0 ? c.T / 20.0 : 0.05);
    c.step.dt = t.value("dt", 1e-3);
    c.step.newton_tol = t.value("newton_tol", 1e-10);
    c.step.newton_max_iter = t.value("newton_max_iter", 50);
    c.step.blowup_R = t.value("blowup_R", 1e6);
    c.step.positivity_floor = t.value("positivity_floor", 1e-12);
    c.step.substeps_per_noise_interval = t.value("substeps_per_noise_interval", 4);
    c.step.stratonovich_correction_enabled = t.value("stratonovich_correction", true);
    c.step.scheme = parse_scheme(t.value("scheme", "entropy_implicit"));
  }

  if (j.contains("ensemble")) {
    const auto& e = j.at("ensemble");
    c.ensemble.m_paths = e.value("m_paths", 1);
    c.ensemble.base_seed = e.value("base_seed", 1ULL);
    if (e.contains("functionals")) {
      for (const auto& fj : e.at("functionals")) {
        FunctionalSpec spec;
        spec.name = fj.at("name").get<std::string>();
        spec.t = fj.value("t", -1.0);
        spec.p = fj.value("p", 1.0);
        spec.base = fj.value("base", "");
        c.ensemble.functionals.push_back(spec);
      }
    }
  }

  if (j.contains("output")) {
    const auto& o = j.at("output");
    c.output.directory = o.value("directory", "out");
    c.output.stride = o.value("stride", 1);
    if (o.contains("formats")) c.output.formats = o.at("formats").get<std::vector<std::string>>();
    c.output.dump_path = o.value("dump_path", false);
  }

  if (j.contains("convergence")) {
    const auto& v = j.at("convergence");
    c.convergence.study = v.value("study", "em_order");
    if (v.contains("eta_exponents")) c.convergence.eta_exponents = v.at("eta_exponents").get<std::vector<int>>();
    if (v.contains("grids")) c.convergence.grids = v.at("grids").get<std::vector<int>>();
    c.convergence.m_paths = v.value("m_paths", 1000);
    c.convergence.substeps = v.value("substeps", 4);
    c.convergence.uncorrected_all_levels = v.value("uncorrected_all_levels", false);
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config: " + path.string());
  nlohmann::json j = nlohmann::json::parse(f, nullptr, true, /*ignore_comments=*/true);
  return parse_config(j);
}

inline Grid build_grid(const GridConfig& gc) {
  return Grid(gc.dims, gc.shape, gc.extent / gc.shape[0]);
}

inline SpeciesFields build_initial(const RunConfig& c) {
  const Grid g = build_grid(c.grid);
  const int n = c.model.n;
  SpeciesFields u(g, n);
  switch (c.initial.kind) {
    case InitialConfig::Kind::constant: {
      if (static_cast<int>(c.initial.values.size()) != n)
        throw ConfigRejected("initial.values size mismatch");
      for (int i = 0; i < n; ++i)
        for (auto& x : u.data[i]) x = c.initial.values[i];
      return u;
    }
    case InitialConfig::Kind::cosine_bump: {
      if (static_cast<int>(c.initial.base.size()) != n ||
          static_cast<int>(c.initial.amplitudes.size()) != n ||
          static_cast<int>(c.initial.modes.size()) != n)
        throw ConfigRejected("initial cosine_bump arrays must have one entry per species");
      const double Lx = g.h * g.shape[0];
      const double Ly = g.h * g.shape[1];
      for (int i = 0; i < n; ++i) {
        const double mode = c.initial.modes[i];
        for (int iy = 0; iy < g.shape[1]; ++iy)
          for (int ix = 0; ix < g.shape[0]; ++ix) {
            double v = std::cos(mode * std::numbers::pi * g.center(0, ix) / Lx);
            if (g.dims == 2) v *= std::cos(mode * std::numbers::pi * g.center(1, iy) / Ly);
            u.data[i][g.index(ix, iy)] = c.initial.base[i] + c.initial.amplitudes[i] * v;
          }
      }
      return u;
    }
    case InitialConfig::Kind::from_file: {
      std::ifstream f(c.initial.path);
      if (!f) throw ConfigRejected("initial.from_file: cannot open " + c.initial.path);
      nlohmann::json j = nlohmann::json::parse(f, nullptr, true, true);
      const auto data = j.at("data").get<std::vector<std::vector<double>>>();
      if (static_cast<int>(data.size()) != n) throw ConfigRejected("initial file species mismatch");
      for (int i = 0; i < n; ++i) {
        if (static_cast<int>(data[i].size()) != g.cells())
          throw ConfigRejected("initial file cell count mismatch");
        u.data[i] = data[i];
      }
      return u;
    }
  }
  throw ConfigRejected("unreachable initial kind");
}

// --- assumption validation ------------------------------------------------------

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
  std::string summary() const {
    std::string s;
    for (const auto& e : errors) s += "error: " + e + "\n";
    for (const auto& w : warnings) s += "warning: " + w + "\n";
    if (s.empty()) s = "ok\n";
    return s;
  }
};

/// Checks the model assumptions: coefficient signs and detailed balance,
/// regime consistency, the gamma bound (plain gamma <= 1 with self-diffusion,
/// gamma <= 2/d without), nonnegative initial data, and the noise/entropy
/// interaction caveat for gamma < 1 (warning only).
inline ValidationReport validate_model(const RunConfig& c) {
  ValidationReport rep;
  const ModelParams& m = c.model;

  if (m.n < 1) rep.errors.push_back("species count must be >= 1");
  if (static_cast<int>(m.a0.size()) != m.n || static_cast<int>(m.a.size()) != m.n)
    rep.errors.push_back("coefficient arrays must have one entry per species");
  if (!rep.errors.empty()) return rep;

  for (int i = 0; i < m.n; ++i) {
    if (m.a0[i] < 0.0) rep.errors.push_back("diffusion coefficients a0 must be nonnegative");
    if (static_cast<int>(m.a[i].size()) != m.n) {
      rep.errors.push_back("a must be an n x n matrix");
      return rep;
    }
    for (int j = 0; j < m.n; ++j)
      if (m.a[i][j] < 0.0) rep.errors.push_back("coupling coefficients a must be nonnegative");
  }

  if (c.pi_solve_failed)
    rep.errors.push_back("detailed balance infeasible: " + c.pi_solve_reason);
  if (static_cast<int>(m.pi.size()) != m.n)
    rep.errors.push_back("pi must have one entry per species");
  if (static_cast<int>(m.pi.size()) == m.n) {
    for (int i = 0; i < m.n; ++i) {
      if (!(m.pi[i] > 0.0)) rep.errors.push_back("pi must be positive");
      for (int j = 0; j < m.n; ++j) {
        const double lhs = m.pi[i] * m.a[i][j];
        const double rhs = m.pi[j] * m.a[j][i];
        if (std::fabs(lhs - rhs) > 1e-12 * std::max(1.0, std::fabs(lhs))) {
          rep.errors.push_back("detailed balance pi_i a_ij = pi_j a_ji violated at (" +
                               std::to_string(i) + "," + std::to_string(j) + ")");
          break;
        }
      }
    }
  }

  if (!(m.gamma > 0.0 && m.gamma <= 1.0))
    rep.errors.push_back("noise exponent gamma must lie in (0, 1]");
  const int d = c.grid.dims;
  switch (m.regime()) {
    case DiffusionRegime::with_self_diffusion:
      break; // gamma <= 1 already enforced
    case DiffusionRegime::without_self_diffusion:
      if (d > 3) rep.errors.push_back("no-self-diffusion regime requires d <= 3");
      if (m.gamma > 2.0 / d)
        rep.errors.push_back("no-self-diffusion regime requires gamma <= 2/d = " +
                             format_double(2.0 / d));
      break;
    case DiffusionRegime::mixed:
      rep.warnings.push_back("mixed regime (some a_ii = 0 with a_i0 = 0 or partial self-diffusion); "
                             "existence theory covers the pure regimes only");
      break;
  }

  if (d != 1 && d != 2)
    rep.errors.push_back("simulation grid supports dims 1 or 2 (got " + std::to_string(d) + ")");
  else if (c.grid.shape[0] < 3 || (d == 2 && c.grid.shape[1] < 3))
    rep.errors.push_back("grid needs at least 3 cells per axis");

  if (m.sigma_scale < 0.0) rep.errors.push_back("sigma_scale must be nonnegative");
  if (m.sigma_scale > 0.0 && m.gamma < 1.0)
    rep.warnings.push_back("gamma < 1: the noise/entropy interaction constant is estimated "
                           "empirically; derivative ratios are unbounded near zero density");

  // nonnegative initial data
  if (d == 1 || d == 2) {
    try {
      if (c.initial.kind != InitialConfig::Kind::from_file || std::filesystem::exists(c.initial.path)) {
        const SpeciesFields u0 = build_initial(c);
        if (u0.min_value() < 0.0)
          rep.errors.push_back("initial data must be nonnegative (min = " +
                               format_double(u0.min_value()) + ")");
        if (!u0.all_finite()) rep.errors.push_back("initial data must be finite");
      } else {
        rep.errors.push_back("initial file does not exist: " + c.initial.path);
      }
    } catch (const std::exception& e) {
      rep.errors.push_back(std::string("initial data: ") + e.what());
    }
  }

  if (!(c.T >= 0.0)) rep.errors.push_back("T must be nonnegative");
  if (!(c.eta > 0.0)) rep.errors.push_back("eta must be positive");
  if (!(c.step.dt > 0.0)) rep.errors.push_back("dt must be positive");
  if (!(c.step.newton_tol > 0.0)) rep.errors.push_back("newton_tol must be positive");
  if (!(c.step.blowup_R > 0.0)) rep.errors.push_back("blowup_R must be positive");
  if (c.step.substeps_per_noise_interval < 1)
    rep.errors.push_back("substeps_per_noise_interval must be >= 1");

  static const std::vector<std::string> known{"entropy_at", "sup_L1", "dissipation_integral",
                                              "terminal_state_mean", "terminal_l2", "moment_p"};
  auto is_known = [&](const std::string& name) {
    for (const auto& k : known)
      if (k == name) return true;
    return false;
  };
  for (const auto& spec : c.ensemble.functionals) {
    if (!is_known(spec.name))
      rep.errors.push_back("unknown functional: " + spec.name);
    else if (spec.name == "moment_p" && (!is_known(spec.base) || spec.base == "moment_p"))
      rep.errors.push_back("moment_p needs a valid base functional (got '" + spec.base + "')");
    if (spec.name == "moment_p" && spec.p < 1.0)
      rep.errors.push_back("moment_p order must be >= 1");
  }
  return rep;
}

} // namespace sktsim
