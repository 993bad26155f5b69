#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "sktsim/grid.hpp"

using namespace sktsim;

namespace {
Grid grid1d(int cells, double length = 1.0) { return Grid(1, {cells, 1}, length / cells); }

ScalarField random_field(const Grid& g, uint64_t seed) {
  ScalarField f(g);
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& x : f.data) x = dist(eng);
  return f;
}
} // namespace

TEST_CASE("laplacian of a constant field vanishes") {
  for (const Grid& g : {grid1d(7), Grid(2, {5, 4}, 0.2)}) {
    ScalarField f(g, 3.25);
    const auto lap = laplacian_neumann(f);
    for (double v : lap.data) REQUIRE(v == 0.0);
  }
}

TEST_CASE("discrete divergence theorem: laplacian integrates to zero") {
  for (const Grid& g : {grid1d(17), Grid(2, {9, 6}, 0.1)}) {
    const auto f = random_field(g, 42);
    double norm = 0.0;
    for (double v : f.data) norm = std::max(norm, std::fabs(v));
    REQUIRE(std::fabs(integrate(laplacian_neumann(f))) <= 1e-12 * std::max(1.0, norm));
  }
}

TEST_CASE("cosine mode is an exact eigenvector of the mirror-ghost stencil") {
  const Grid g = grid1d(4); // h = 0.25
  ScalarField f(g);
  for (int i = 0; i < 4; ++i) f.data[i] = std::cos(std::numbers::pi * g.center(0, i));
  const double lambda = 2.0 / (g.h * g.h) * (1.0 - std::cos(std::numbers::pi * g.h));
  REQUIRE(lambda == Catch::Approx(9.372583).margin(1e-5));
  const auto lap = laplacian_neumann(f);
  for (int i = 0; i < 4; ++i) REQUIRE(lap.data[i] == Catch::Approx(-lambda * f.data[i]).margin(1e-12));
}

TEST_CASE("gradient_sq_norm of a linear ramp approaches the slope integral") {
  const Grid g = grid1d(64);
  ScalarField f(g);
  for (int i = 0; i < 64; ++i) f.data[i] = g.center(0, i);
  // exact integral of |f'|^2 = 1; the face sum misses the two half-cells
  REQUIRE(gradient_sq_norm(f) == Catch::Approx(1.0).epsilon(0.02));
  ScalarField c(g, 7.0);
  REQUIRE(gradient_sq_norm(c) == 0.0);
}

TEST_CASE("gradient_sq_norm is quadratic under scaling") {
  const auto f = random_field(grid1d(23), 7);
  ScalarField cf = f;
  for (auto& x : cf.data) x *= 3.5;
  REQUIRE(gradient_sq_norm(cf) == Catch::Approx(3.5 * 3.5 * gradient_sq_norm(f)).epsilon(1e-12));
}

TEST_CASE("integrate: midpoint rule is exact for linear functions") {
  const Grid g = grid1d(64);
  ScalarField one(g, 1.0);
  REQUIRE(integrate(one) == Catch::Approx(1.0).epsilon(1e-14));
  ScalarField x(g);
  for (int i = 0; i < 64; ++i) x.data[i] = g.center(0, i);
  REQUIRE(integrate(x) == Catch::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("integrate is linear") {
  const Grid g = grid1d(31);
  const auto f = random_field(g, 1);
  const auto h = random_field(g, 2);
  ScalarField sum(g);
  for (int i = 0; i < g.cells(); ++i) sum.data[i] = 2.0 * f.data[i] - 3.0 * h.data[i];
  REQUIRE(integrate(sum) ==
          Catch::Approx(2.0 * integrate(f) - 3.0 * integrate(h)).margin(1e-12));
}

TEST_CASE("laplacian is self-adjoint and negative semidefinite") {
  for (const Grid& g : {grid1d(12), Grid(2, {6, 5}, 0.25)}) {
    const auto f = random_field(g, 11);
    const auto h = random_field(g, 12);
    const auto Lf = laplacian_neumann(f);
    const auto Lh = laplacian_neumann(h);
    double fLh = 0.0, hLf = 0.0, fLf = 0.0;
    for (int c = 0; c < g.cells(); ++c) {
      fLh += f.data[c] * Lh.data[c];
      hLf += h.data[c] * Lf.data[c];
      fLf += f.data[c] * Lf.data[c];
    }
    REQUIRE(fLh == Catch::Approx(hLf).margin(1e-12 * (std::fabs(fLh) + 1.0)));
    REQUIRE(fLf <= 1e-12);
  }
}

TEST_CASE("grid invariants are enforced") {
  REQUIRE_THROWS_AS(Grid(1, {2, 1}, 0.5), DomainError);
  REQUIRE_THROWS_AS(Grid(3, {4, 4}, 0.5), DomainError);
  REQUIRE_THROWS_AS(Grid(1, {4, 1}, -0.1), DomainError);
  const Grid g(2, {4, 5}, 0.5);
  REQUIRE(g.cells() == 20);
  REQUIRE(g.volume() == Catch::Approx(20 * 0.25));
}
