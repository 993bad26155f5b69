#include <catch_amalgamated.hpp>

#include <cmath>

#include "sktsim/noise.hpp"

using namespace sktsim;

TEST_CASE("identical arguments reproduce identical increments") {
  const auto a = sample_path(12345, 3, 2.0, 64);
  const auto b = sample_path(12345, 3, 2.0, 64);
  REQUIRE(a.increments == b.increments);
  REQUIRE(a.nodes == b.nodes);
  const auto c = sample_path(12346, 3, 2.0, 64);
  REQUIRE(a.increments != c.increments);
}

TEST_CASE("normalized increments have unit sample variance") {
  const int M = 100000;
  const auto p = sample_path(7, 1, 1.0, M);
  double mean = 0.0;
  for (int k = 0; k < M; ++k) mean += p.increment(k, 0);
  mean /= M;
  double var = 0.0;
  for (int k = 0; k < M; ++k) {
    const double z = p.increment(k, 0) - mean;
    var += z * z;
  }
  var = var / (M - 1) / p.eta;
  REQUIRE(var >= 0.99);
  REQUIRE(var <= 1.01);
  REQUIRE(std::fabs(mean / std::sqrt(p.eta / M)) <= 4.0); // mean of dW/sqrt(eta) ~ N(0, 1/M)
}

TEST_CASE("interpolant hits the nodes exactly and is linear in between") {
  const auto p = sample_path(9, 2, 1.0, 16);
  for (int k = 0; k <= p.M; ++k) {
    const auto v = wz_value(p, p.time(k));
    for (int j = 0; j < p.n; ++j) REQUIRE(v[j] == p.node(k, j));
  }
  // mesh sizes whose eta is not a binary fraction still hit the endpoint
  for (int M : {3, 7, 10, 13}) {
    const auto q = sample_path(11, 1, 1.0, M);
    REQUIRE(wz_value(q, 1.0)[0] == q.node(M, 0));
    REQUIRE(wz_value(q, 0.0)[0] == q.node(0, 0));
  }
  const double tmid = 0.5 * (p.time(3) + p.time(4));
  const auto v = wz_value(p, tmid);
  for (int j = 0; j < p.n; ++j)
    REQUIRE(v[j] == Catch::Approx(0.5 * (p.node(3, j) + p.node(4, j))).epsilon(1e-15));
  REQUIRE_THROWS_AS(wz_value(p, -0.1), DomainError);
  REQUIRE_THROWS_AS(wz_value(p, 1.1), DomainError);
}

TEST_CASE("slopes are increment over eta and telescope to W(T)") {
  const auto p = sample_path(21, 2, 0.5, 32);
  for (int j = 0; j < p.n; ++j) {
    double sum = 0.0;
    for (int k = 0; k < p.M; ++k) {
      const auto s = wz_slope(p, k);
      REQUIRE(s[j] == p.increment(k, j) / p.eta);
      sum += s[j] * p.eta;
    }
    REQUIRE(sum == Catch::Approx(p.node(p.M, j)).margin(1e-12));
  }
  REQUIRE_THROWS_AS(wz_slope(p, -1), DomainError);
  REQUIRE_THROWS_AS(wz_slope(p, p.M), DomainError);
}

TEST_CASE("slope is the derivative of the interpolant on each interval") {
  const auto p = sample_path(4, 1, 1.0, 8);
  const auto s = wz_slope(p, 2);
  const double t0 = p.time(2) + 0.25 * p.eta;
  const double t1 = p.time(2) + 0.75 * p.eta;
  const auto v0 = wz_value(p, t0);
  const auto v1 = wz_value(p, t1);
  REQUIRE((v1[0] - v0[0]) / (t1 - t0) == Catch::Approx(s[0]).epsilon(1e-9));
}

TEST_CASE("bridge refinement preserves coarse nodes bitwise") {
  const auto p = sample_path(1234, 2, 1.0, 16);
  const auto q = refine_bridge(p);
  REQUIRE(q.M == 2 * p.M);
  for (int k = 0; k <= p.M; ++k)
    for (int j = 0; j < p.n; ++j) REQUIRE(q.node(2 * k, j) == p.node(k, j));
  // refined increments sum back to the coarse increments
  for (int k = 0; k < p.M; ++k)
    for (int j = 0; j < p.n; ++j)
      REQUIRE(q.increment(2 * k, j) + q.increment(2 * k + 1, j) ==
              Catch::Approx(p.increment(k, j)).margin(1e-15));
}

TEST_CASE("coarsening keeps shared node values bitwise") {
  const auto fine = sample_path(55, 1, 1.0, 64);
  const auto coarse = coarsen_path(fine, 4);
  REQUIRE(coarse.M == 16);
  for (int k = 0; k <= coarse.M; ++k) REQUIRE(coarse.node(k, 0) == fine.node(4 * k, 0));
  REQUIRE_THROWS_AS(coarsen_path(fine, 5), DomainError);
}

TEST_CASE("path argument validation") {
  REQUIRE_THROWS_AS(sample_path(1, 1, 0.0, 4), DomainError);
  REQUIRE_THROWS_AS(sample_path(1, 1, 1.0, 0), DomainError);
  REQUIRE_THROWS_AS(sample_path(1, 0, 1.0, 4), DomainError);
}
