#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "sktsim/diagnostics.hpp"

using namespace sktsim;

namespace {

ModelParams cross2(double a12 = 2.0, double a21 = 1.0, double a11 = 0.1) {
  ModelParams p;
  p.n = 2;
  p.a0 = {0.05, 0.05};
  p.a = {{a11, a12}, {a21, a11}};
  const auto db = detailed_balance_solve(p.a);
  p.pi = db.pi;
  return p;
}

SpeciesFields cosine_pair(const Grid& g, double amp1, int mode1, double amp2, int mode2) {
  SpeciesFields u(g, 2);
  for (int c = 0; c < g.cells(); ++c) {
    const double x = g.center(0, c);
    u.data[0][c] = 1.0 + amp1 * std::cos(mode1 * std::numbers::pi * x);
    u.data[1][c] = 1.0 + amp2 * std::cos(mode2 * std::numbers::pi * x);
  }
  return u;
}

} // namespace

TEST_CASE("record on a constant state") {
  const auto p = cross2();
  SpeciesFields u(Grid(1, {16, 1}, 1.0 / 16), 2, 1.5);
  const auto r = record(u, 0.0, p);
  REQUIRE(r.production == 0.0);
  REQUIRE(r.segregation == 0.0);
  REQUIRE(r.mass[0] == Catch::Approx(1.5).epsilon(1e-14));
  REQUIRE(r.entropy >= 0.0);
  REQUIRE(r.linf == Catch::Approx(1.5));
  REQUIRE(r.l2_norm == Catch::Approx(std::sqrt(2.0) * 1.5).epsilon(1e-12));
}

TEST_CASE("single species without coupling: only the sqrt-gradient term is active") {
  ModelParams p;
  p.n = 1;
  p.a0 = {1.0};
  p.a = {{0.0}};
  p.pi = {1.7};
  const Grid g(1, {32, 1}, 1.0 / 32);
  SpeciesFields u(g, 1);
  for (int c = 0; c < 32; ++c) u.data[0][c] = 1.0 + 0.5 * std::cos(std::numbers::pi * g.center(0, c));
  const auto r = record(u, 0.0, p);
  REQUIRE(r.production == Catch::Approx(4.0 * p.pi[0] * r.sqrt_grad[0]).epsilon(1e-12));
}

TEST_CASE("centered entropy difference balances the production rate") {
  const auto p = cross2();
  StepConfig cfg;
  cfg.dt = 1e-4;
  const Grid g(1, {64, 1}, 1.0 / 64);
  const auto u0 = cosine_pair(g, 0.5, 1, -0.3, 2);
  const auto path = sample_path(1, 2, 0.02, 1);
  const auto traj = simulate_path(u0, path, p, cfg, 1);
  REQUIRE(traj.terminal.completed());
  const size_t k = 50;
  const double dt = traj.times[k + 1] - traj.times[k];
  const double dHdt =
      (entropy(traj.states[k + 1], p).total - entropy(traj.states[k - 1], p).total) / (2.0 * dt);
  const double prod = record(traj.states[k], traj.times[k], p).production;
  REQUIRE(prod > 0.0);
  REQUIRE(std::fabs(dHdt + prod) / prod <= 0.05);
}

TEST_CASE("norm report of constant and zero trajectories") {
  ModelParams p;
  p.n = 1;
  p.a0 = {1.0};
  p.a = {{0.0}};
  p.pi = {1.0};
  const Grid g(1, {16, 1}, 1.0 / 16);
  Trajectory traj;
  traj.terminal = {TerminalStatus::Kind::completed, 1.0, 0.0};
  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    traj.times.push_back(t);
    traj.states.emplace_back(g, 1, 2.3);
    traj.clamp_counts.push_back(0);
  }
  auto rep = norm_report(traj, p);
  REQUIRE(rep.lrho1_w1rho1 == Catch::Approx(2.3).epsilon(1e-12));
  REQUIRE(rep.l1p2d == Catch::Approx(2.3).epsilon(1e-12));
  REQUIRE(rep.rho1 == Catch::Approx(1.5));
  REQUIRE(rep.rho2 == Catch::Approx(4.0 / 3.0));

  for (auto& s : traj.states)
    for (auto& v : s.data[0]) v = 0.0;
  rep = norm_report(traj, p);
  REQUIRE(rep.lrho1_w1rho1 == 0.0);
  REQUIRE(rep.l1p2d == 0.0);

  traj.terminal = {TerminalStatus::Kind::stopped_at_guard, 0.5, 0.0};
  REQUIRE_THROWS_AS(norm_report(traj, p), NormUnavailable);
}

TEST_CASE("norm exponents follow (d+2)/(d+1) and (2d+2)/(2d+1)") {
  ModelParams p;
  p.n = 1;
  p.a0 = {1.0};
  p.a = {{0.0}};
  p.pi = {1.0};
  Trajectory traj;
  traj.terminal = {TerminalStatus::Kind::completed, 1.0, 0.0};
  const Grid g2(2, {4, 4}, 0.25);
  for (double t : {0.0, 1.0}) {
    traj.times.push_back(t);
    traj.states.emplace_back(g2, 1, 1.0);
    traj.clamp_counts.push_back(0);
  }
  const auto rep = norm_report(traj, p);
  REQUIRE(rep.rho1 == Catch::Approx(4.0 / 3.0));
  REQUIRE(rep.rho2 == Catch::Approx(6.0 / 5.0));
}

TEST_CASE("fractional seminorm closed form and properties") {
  const int K = 512;
  std::vector<double> t(K), v(K);
  for (int k = 0; k < K; ++k) t[k] = v[k] = static_cast<double>(k) / (K - 1);

  // v(t) = t, alpha = 1/4: exact double integral is 8/15
  REQUIRE(std::fabs(fractional_seminorm(t, v, 0.25) - 8.0 / 15.0) <= 1e-3);

  std::vector<double> c(K, 4.2);
  REQUIRE(fractional_seminorm(t, c, 0.25) == 0.0);

  // integrand increases pointwise in alpha when |t - s| < 1
  REQUIRE(fractional_seminorm(t, v, 0.4) > fractional_seminorm(t, v, 0.2));

  // quadratic scaling
  std::vector<double> v3(K);
  for (int k = 0; k < K; ++k) v3[k] = 3.0 * v[k];
  REQUIRE(fractional_seminorm(t, v3, 0.25) ==
          Catch::Approx(9.0 * fractional_seminorm(t, v, 0.25)).epsilon(1e-12));

  REQUIRE_THROWS_AS(fractional_seminorm(t, v, 0.0), DomainError);
  REQUIRE_THROWS_AS(fractional_seminorm(t, v, 1.0), DomainError);
}

TEST_CASE("trajectory seminorm uses the discrete L2 distance") {
  ModelParams p;
  p.n = 1;
  p.a0 = {1.0};
  p.a = {{0.0}};
  p.pi = {1.0};
  const Grid g(1, {4, 1}, 0.25);
  Trajectory traj;
  traj.terminal = {TerminalStatus::Kind::completed, 1.0, 0.0};
  const int K = 128;
  for (int k = 0; k < K; ++k) {
    traj.times.push_back(static_cast<double>(k) / (K - 1));
    traj.states.emplace_back(g, 1, traj.times.back()); // ||u(t) - u(s)||_{L2} = |t - s|
    traj.clamp_counts.push_back(0);
  }
  std::vector<double> vals(K);
  for (int k = 0; k < K; ++k) vals[k] = traj.times[k];
  REQUIRE(fractional_seminorm_l2(traj, 0.25) ==
          Catch::Approx(fractional_seminorm(traj.times, vals, 0.25)).epsilon(1e-12));
}

TEST_CASE("segregation index extremes") {
  const Grid g(1, {32, 1}, 1.0 / 32);
  SpeciesFields u(g, 2);
  for (int c = 0; c < 32; ++c) {
    u.data[0][c] = 1.0 + 0.5 * std::cos(std::numbers::pi * g.center(0, c));
    u.data[1][c] = u.data[0][c];
  }
  REQUIRE(segregation_index(u, 0, 1) == Catch::Approx(1.0).epsilon(1e-12));
  for (int c = 0; c < 32; ++c) u.data[1][c] = 3.0 - u.data[0][c];
  REQUIRE(segregation_index(u, 0, 1) == Catch::Approx(-1.0).epsilon(1e-12));
  REQUIRE_THROWS_AS(segregation_index(u, 1, 1), DomainError);
}

TEST_CASE("strong cross-diffusion segregates overlapping bumps") {
  // orthogonal cosine modes start uncorrelated; the cross-coupled run must end
  // more segregated than the uncoupled baseline (fixed config and seed)
  const Grid g(1, {64, 1}, 1.0 / 64);
  const auto u0 = cosine_pair(g, 0.6, 1, 0.6, 2);
  StepConfig cfg;
  cfg.dt = 1e-3;
  const auto path = sample_path(1, 2, 0.5, 1);

  ModelParams coupled;
  coupled.n = 2;
  coupled.a0 = {0.05, 0.05};
  coupled.a = {{0.0, 3.0}, {3.0, 0.0}};
  coupled.pi = {0.5, 0.5};
  ModelParams baseline = coupled;
  baseline.a = {{0.0, 0.0}, {0.0, 0.0}};

  const auto tc = simulate_path(u0, path, coupled, cfg, 100);
  const auto tb = simulate_path(u0, path, baseline, cfg, 100);
  REQUIRE(tc.terminal.completed());
  REQUIRE(tb.terminal.completed());
  const double sc = segregation_index(tc.states.back(), 0, 1);
  const double sb = segregation_index(tb.states.back(), 0, 1);
  REQUIRE(sc < sb);
}
