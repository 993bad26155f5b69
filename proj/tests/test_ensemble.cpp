#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "sktsim/ensemble.hpp"

using namespace sktsim;

namespace {

ModelParams gbm_params(double scale = 1.0) {
  ModelParams p;
  p.n = 1;
  p.a0 = {0.0};
  p.a = {{0.0}};
  p.pi = {1.0};
  p.gamma = 1.0;
  p.sigma_scale = scale;
  return p;
}

SpeciesFields tiny_constant(double value) { return SpeciesFields(Grid(1, {3, 1}, 1.0 / 3.0), 1, value); }

ModelParams cross2(double scale) {
  ModelParams p;
  p.n = 2;
  p.a0 = {0.05, 0.05};
  p.a = {{0.1, 2.0}, {1.0, 0.1}};
  p.pi = {1.0 / 3.0, 2.0 / 3.0};
  p.gamma = 0.5;
  p.sigma_scale = scale;
  return p;
}

} // namespace

TEST_CASE("zero noise makes every path identical") {
  auto p = cross2(0.0);
  StepConfig cfg;
  cfg.scheme = Scheme::em_ito;
  const Grid g(1, {16, 1}, 1.0 / 16);
  SpeciesFields u0(g, 2);
  for (int c = 0; c < 16; ++c) {
    u0.data[0][c] = 1.0 + 0.4 * std::cos(std::numbers::pi * g.center(0, c));
    u0.data[1][c] = 1.0;
  }
  const std::vector<FunctionalSpec> specs{{"entropy_at", -1.0, 1.0, ""},
                                          {"sup_L1", -1.0, 1.0, ""},
                                          {"terminal_state_mean", -1.0, 1.0, ""}};
  const auto res = run_ensemble(u0, p, cfg, 0.1, 4, 16, 5, specs, 2, 4);
  for (const auto& s : res.stats) {
    REQUIRE(s.variance == 0.0);
    REQUIRE(s.ci95_halfwidth == 0.0);
  }
}

TEST_CASE("terminal mean is a martingale and the second moment is lognormal") {
  const auto p = gbm_params();
  StepConfig cfg;
  cfg.scheme = Scheme::em_ito;
  const auto u0 = tiny_constant(1.0);
  const std::vector<FunctionalSpec> specs{{"terminal_state_mean", -1.0, 1.0, ""},
                                          {"moment_p", -1.0, 2.0, "terminal_state_mean"}};
  const auto res = run_ensemble(u0, p, cfg, 1.0, 64, 1000, 99, specs, 2, 64);
  REQUIRE(res.stats[0].stopped_fraction == 0.0);
  REQUIRE(std::fabs(res.stats[0].mean - 1.0) <= res.stats[0].ci95_halfwidth);
  REQUIRE(std::fabs(res.stats[1].mean - std::exp(0.25)) <= res.stats[1].ci95_halfwidth);
}

TEST_CASE("moment with p = 1 is bitwise the plain mean") {
  const auto p = gbm_params();
  StepConfig cfg;
  cfg.scheme = Scheme::em_ito;
  const auto u0 = tiny_constant(1.0);
  const std::vector<FunctionalSpec> specs{{"terminal_state_mean", -1.0, 1.0, ""},
                                          {"moment_p", -1.0, 1.0, "terminal_state_mean"}};
  const auto res = run_ensemble(u0, p, cfg, 0.5, 16, 200, 7, specs, 1, 16);
  REQUIRE(res.stats[0].mean == res.stats[1].mean);
  REQUIRE(res.stats[0].variance == res.stats[1].variance);
}

TEST_CASE("power-mean ordering holds exactly on any sample set") {
  std::vector<double> samples{0.3, 1.2, 2.7, 0.9, 1.6, 4.1, 0.2};
  double prev = 0.0;
  for (double p : {1.0, 2.0, 3.0, 4.0}) {
    const auto s = moment_estimate(samples, p);
    const double root = std::pow(s.mean, 1.0 / p);
    REQUIRE(root >= prev - 1e-12);
    prev = root;
  }
  REQUIRE_THROWS_AS(moment_estimate(samples, 0.5), DomainError);
}

TEST_CASE("confidence halfwidth shrinks like the square root of the path count") {
  const auto p = gbm_params();
  StepConfig cfg;
  cfg.scheme = Scheme::em_ito;
  const auto u0 = tiny_constant(1.0);
  const std::vector<FunctionalSpec> specs{{"terminal_state_mean", -1.0, 1.0, ""}};
  const auto small = run_ensemble(u0, p, cfg, 1.0, 64, 200, 11, specs, 2, 64);
  const auto large = run_ensemble(u0, p, cfg, 1.0, 64, 800, 11, specs, 2, 64);
  const double ratio = small.stats[0].ci95_halfwidth / large.stats[0].ci95_halfwidth;
  REQUIRE(ratio >= 2.0 * 0.8);
  REQUIRE(ratio <= 2.0 * 1.2);
}

TEST_CASE("stats are bitwise identical across thread counts") {
  auto p = cross2(0.3);
  StepConfig cfg;
  cfg.scheme = Scheme::em_ito;
  const Grid g(1, {16, 1}, 1.0 / 16);
  SpeciesFields u0(g, 2, 1.0);
  const std::vector<FunctionalSpec> specs{{"entropy_at", -1.0, 1.0, ""},
                                          {"sup_L1", -1.0, 1.0, ""},
                                          {"dissipation_integral", -1.0, 1.0, ""}};
  const auto a = run_ensemble(u0, p, cfg, 0.2, 8, 60, 321, specs, 1, 2);
  const auto b = run_ensemble(u0, p, cfg, 0.2, 8, 60, 321, specs, 4, 2);
  const auto c = run_ensemble(u0, p, cfg, 0.2, 8, 60, 321, specs, 8, 2);
  for (size_t f = 0; f < specs.size(); ++f) {
    REQUIRE(a.stats[f].mean == b.stats[f].mean);
    REQUIRE(a.stats[f].mean == c.stats[f].mean);
    REQUIRE(a.stats[f].variance == b.stats[f].variance);
    REQUIRE(a.stats[f].variance == c.stats[f].variance);
  }
}

TEST_CASE("all guard-stopped paths raise the degenerate error") {
  const auto p = gbm_params();
  StepConfig cfg;
  cfg.scheme = Scheme::em_ito;
  cfg.blowup_R = 0.5; // initial norm is already above the guard
  const auto u0 = tiny_constant(1.0);
  const std::vector<FunctionalSpec> specs{{"terminal_state_mean", -1.0, 1.0, ""}};
  REQUIRE_THROWS_AS(run_ensemble(u0, p, cfg, 0.5, 8, 10, 3, specs, 1, 8), EnsembleDegenerate);
}

TEST_CASE("gronwall: deterministic dissipation satisfies the bound with K <= 1") {
  auto p = cross2(0.0);
  StepConfig cfg;
  cfg.scheme = Scheme::em_ito;
  const Grid g(1, {32, 1}, 1.0 / 32);
  SpeciesFields u0(g, 2);
  for (int c = 0; c < 32; ++c) {
    u0.data[0][c] = 1.0 + 0.5 * std::cos(std::numbers::pi * g.center(0, c));
    u0.data[1][c] = 1.0 - 0.3 * std::cos(std::numbers::pi * g.center(0, c));
  }
  const double h0 = entropy(u0, p).total;
  const std::vector<double> grid_t{0.05, 0.1, 0.15, 0.2};
  std::vector<FunctionalSpec> specs;
  for (double t : grid_t) specs.push_back({"entropy_at", t, 1.0, ""});
  for (double t : grid_t) specs.push_back({"dissipation_integral", t, 1.0, ""});
  const auto res = run_ensemble(u0, p, cfg, 0.2, 20, 4, 5, specs, 2, 1);
  std::vector<EnsembleStats> ent(res.stats.begin(), res.stats.begin() + grid_t.size());
  std::vector<EnsembleStats> dis(res.stats.begin() + grid_t.size(), res.stats.end());

  // noise off: the entropy means are nonincreasing in t
  for (size_t k = 1; k < ent.size(); ++k) REQUIRE(ent[k].mean <= ent[k - 1].mean + 1e-9);

  const double C_h = a5_constant_estimate(p, 1000.0, 1000); // sigma = 0 -> 0
  REQUIRE(C_h == 0.0);
  const auto rep = gronwall_check(grid_t, ent, dis, C_h, h0);
  REQUIRE(rep.K_fit <= 1.0);
  REQUIRE(rep.violations == 0);
}

TEST_CASE("gronwall: entropy minimum is invariant when h0 = 0") {
  auto p = cross2(0.0);
  StepConfig cfg;
  cfg.scheme = Scheme::em_ito;
  SpeciesFields u0(Grid(1, {16, 1}, 1.0 / 16), 2, 1.0); // h(1) = 0
  const std::vector<double> grid_t{0.05, 0.1};
  std::vector<FunctionalSpec> specs;
  for (double t : grid_t) specs.push_back({"entropy_at", t, 1.0, ""});
  const auto res = run_ensemble(u0, p, cfg, 0.1, 10, 2, 9, specs, 1, 1);
  for (const auto& s : res.stats) REQUIRE(std::fabs(s.mean) <= 1e-10);
}
