#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "spim/dataio.hpp"
#include "spim/metrics.hpp"
#include "spim/rng.hpp"
#include "spim/tv.hpp"

using namespace spim;

TEST_CASE("forward gradient on a hand image, replicate boundary") {
  // 2x2 image [[1, 2], [4, 8]]
  Eigen::VectorXd x(4);
  x << 1, 2, 4, 8;
  Eigen::VectorXd dh(4), dv(4);
  detail::grad_forward(x, 2, dh, dv);
  REQUIRE(dh[0] == 1.0);  // 2-1
  REQUIRE(dh[1] == 0.0);  // last column
  REQUIRE(dh[2] == 4.0);  // 8-4
  REQUIRE(dh[3] == 0.0);
  REQUIRE(dv[0] == 3.0);  // 4-1
  REQUIRE(dv[1] == 6.0);  // 8-2
  REQUIRE(dv[2] == 0.0);  // last row
  REQUIRE(dv[3] == 0.0);
}

TEST_CASE("grad_adjoint is the exact adjoint of grad_forward") {
  const int side = 7, n = side * side;
  Rng rng(8, 0);
  Eigen::VectorXd x(n), h(n), v(n);
  for (int i = 0; i < n; ++i) {
    x[i] = rng.gaussian();
    h[i] = rng.gaussian();
    v[i] = rng.gaussian();
  }
  Eigen::VectorXd dh(n), dv(n), adj(n);
  detail::grad_forward(x, side, dh, dv);
  detail::grad_adjoint(h, v, side, adj);
  const double lhs = dh.dot(h) + dv.dot(v);
  const double rhs = x.dot(adj);
  REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("isotropic shrink scales the gradient magnitude") {
  Eigen::VectorXd h(2), v(2);
  h << 3.0, 0.1;
  v << 4.0, 0.1;
  shrink(h, v, 1.0, true);
  // magnitude 5 -> 4, direction kept
  REQUIRE(h[0] == Catch::Approx(2.4).margin(1e-12));
  REQUIRE(v[0] == Catch::Approx(3.2).margin(1e-12));
  // magnitude sqrt(0.02) < 1 -> zero
  REQUIRE(h[1] == 0.0);
  REQUIRE(v[1] == 0.0);
}

TEST_CASE("anisotropic shrink soft-thresholds each component") {
  Eigen::VectorXd h(3), v(3);
  h << 3.0, -0.5, -2.0;
  v << 0.2, 4.0, -0.9;
  shrink(h, v, 1.0, false);
  REQUIRE(h[0] == Catch::Approx(2.0).margin(1e-12));
  REQUIRE(v[0] == 0.0);
  REQUIRE(h[1] == 0.0);
  REQUIRE(v[1] == Catch::Approx(3.0).margin(1e-12));
  REQUIRE(h[2] == Catch::Approx(-1.0).margin(1e-12));
  REQUIRE(v[2] == 0.0);  // |-0.9| < t, inside the dead zone
}

TEST_CASE("tv objective by hand on a tiny problem") {
  Image x(2);
  x.pixels = {0.0, 1.0, 0.0, 0.0};
  PatternMatrix p;
  p.m = 1;
  p.n = 4;
  p.kind = PatternKind::binary_sh;
  p.bits = {1, 1, 1, 1};
  Measurement y;
  y.values = {2.0};  // Ax = 1, residual -1

  TVConfig cfg;
  cfg.mu = 4.0;
  cfg.isotropic = false;
  // anisotropic TV: |dh| sums 1 (0->1) + 1 (1->0 vertical)... enumerate:
  // dh = [1, 0, 0, 0], dv = [0, -1, 0, 0] -> TV = 2
  REQUIRE(tv_objective(p, y, x, cfg) == Catch::Approx(2.0 + 0.5 * 4.0 * 1.0).margin(1e-12));

  cfg.isotropic = true;
  // pixel 0: hypot(1,0)=1, pixel 1: hypot(0,-1)=1 -> TV = 2 as well here
  REQUIRE(tv_objective(p, y, x, cfg) == Catch::Approx(4.0).margin(1e-12));
}

TEST_CASE("noiseless recovery at half sampling on a piecewise-constant image") {
  const int side = 16, n = side * side;
  const auto x = synth_phantom(side, 21, 0);
  const auto patterns = select_rows(scrambled_hadamard(n, 21), n / 2, 3);
  const auto y = forward_measure(patterns, x);

  TVConfig cfg;  // defaults mu=2^9, beta=2^4
  const auto [rec, report] = tval3_reconstruct(patterns, y, cfg);
  REQUIRE(report.outer_iterations >= 1);
  REQUIRE(psnr(x, rec) > 30.0);
}

TEST_CASE("full sampling reconstructs almost exactly") {
  const int side = 8, n = side * side;
  const auto x = synth_phantom(side, 22, 1);
  const auto patterns = scrambled_hadamard(n, 5);
  const auto y = forward_measure(patterns, x);
  const auto [rec, report] = tval3_reconstruct(patterns, y, TVConfig{});
  REQUIRE(psnr(x, rec) > 35.0);
}

TEST_CASE("solver reduces the objective against the initial guess") {
  const int side = 16, n = side * side;
  const auto x = synth_phantom(side, 23, 2);
  const auto patterns = select_rows(scrambled_hadamard(n, 9), n / 4, 2);
  auto y = forward_measure(patterns, x);
  NoiseSpec noise;
  noise.model = NoiseModel::gaussian;
  noise.sigma = 0.05;
  noise.seed = 77;
  y = simulate_noise(y, noise);

  TVConfig cfg;
  const auto [rec, report] = tval3_reconstruct(patterns, y, cfg);
  // compare against the flat back-projection baseline image
  Image flat(side);
  for (auto& v : flat.pixels) v = 0.5;
  REQUIRE(report.objective < tv_objective(patterns, y, flat, cfg));
  REQUIRE(std::isfinite(report.objective));
}

TEST_CASE("convergence flag and tolerances behave") {
  const int side = 8, n = side * side;
  const auto x = synth_phantom(side, 24, 0);
  const auto patterns = scrambled_hadamard(n, 4);
  const auto y = forward_measure(patterns, x);

  TVConfig strict;
  strict.tol = 1e-6;
  strict.max_outer = 2;  // cannot converge that fast
  const auto [rec1, rep1] = tval3_reconstruct(patterns, y, strict);
  REQUIRE_FALSE(rep1.converged);
  REQUIRE(rep1.outer_iterations == 2);

  TVConfig loose;
  loose.tol = 1e-3;
  const auto [rec2, rep2] = tval3_reconstruct(patterns, y, loose);
  REQUIRE(rep2.converged);
  REQUIRE(rep2.rel_change < loose.tol);
}

TEST_CASE("solver validates inputs") {
  const auto patterns = scrambled_hadamard(16, 1);
  Measurement y;
  y.values.assign(3, 0.0);  // wrong m
  REQUIRE_THROWS_AS(tval3_reconstruct(patterns, y, TVConfig{}), invalid_input);

  y.values.assign(16, 0.0);
  y.values[2] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(tval3_reconstruct(patterns, y, TVConfig{}), numerical_error);

  TVConfig bad;
  bad.mu = 0.0;
  y.values[2] = 0.0;
  REQUIRE_THROWS_AS(tval3_reconstruct(patterns, y, bad), invalid_input);
}

TEST_CASE("anisotropic mode also recovers structure") {
  const int side = 16, n = side * side;
  const auto x = synth_phantom(side, 25, 1);
  const auto patterns = select_rows(scrambled_hadamard(n, 11), n / 2, 6);
  const auto y = forward_measure(patterns, x);
  TVConfig cfg;
  cfg.isotropic = false;
  const auto [rec, report] = tval3_reconstruct(patterns, y, cfg);
  REQUIRE(psnr(x, rec) > 28.0);
}

TEST_CASE("output pixels are clamped to the unit interval") {
  const int side = 8, n = side * side;
  const auto patterns = select_rows(scrambled_hadamard(n, 2), n / 2, 1);
  Measurement y;
  Rng rng(33, 0);
  for (int i = 0; i < patterns.m; ++i) y.values.push_back(rng.uniform_in(-5.0, 40.0));
  const auto [rec, report] = tval3_reconstruct(patterns, y, TVConfig{});
  for (double v : rec.pixels) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
  }
}
