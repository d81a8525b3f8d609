// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "curvkit/fdhvp.hpp"
#include "curvkit/numerics.hpp"

namespace curvkit {
namespace {

TEST(FdHvp, QuadraticIsExactUpToRoundoff) {
  auto a = random_symmetric(10, 2);
  auto q = make_quadratic({a});
  Vec theta(10, 0.0), v(10);
  Rng(1).fill_normal(v);
  Vec hv = fd::hvp_central(*q, std::span<const double>(theta), v, {1e-3});
  EXPECT_LT(rel_error(hv, a.multiply(v)), 1e-13);
}

TEST(FdHvp, RestoresThetaBitExactly) {
  auto mlp = make_mlp({3, 4, 1}, {16, 4, {}}, 2);
  Vec theta = mlp->initial_parameters(2);
  const Vec before = theta;
  Vec v(theta.size(), 0.1);
  fd::hvp_central(*mlp, std::span<double>(theta), v, {0.37});
  EXPECT_EQ(std::memcmp(theta.data(), before.data(), theta.size() * sizeof(double)), 0);
}

TEST(FdHvp, ScalesBackByProbeNorm) {
  auto q = make_quadratic({DenseMatrix::diagonal(Vec{2.0, 3.0})});
  Vec theta{0.0, 0.0};
  Vec hv = fd::hvp_central(*q, std::span<const double>(theta), Vec{10.0, 0.0}, {1e-2});
  EXPECT_NEAR(hv[0], 20.0, 1e-12);
  EXPECT_NEAR(hv[1], 0.0, 1e-12);
}

TEST(FdHvp, InvalidConfigThrows) {
  auto q = make_quadratic({DenseMatrix::identity(2)});
  Vec theta{0.0, 0.0};
  EXPECT_THROW(fd::hvp_central(*q, std::span<const double>(theta), Vec{1.0, 0.0}, {-1.0}),
               std::invalid_argument);
  EXPECT_THROW(fd::hvp_central(*q, std::span<const double>(theta), Vec{1.0}, {1e-3}),
               std::invalid_argument);
}

TEST(FdHvp, SecondDifferenceOfSine) {
  auto r = make_rippled({0.0, 40.0, 1, 1.0});
  const double e = 1e-2;
  // Exact: -sin(1) * 2 (1 - cos e) / e^2.
  const double expected = -std::sin(1.0) * 2.0 * (1.0 - std::cos(e)) / (e * e);
  EXPECT_NEAR(fd::second_difference(*r, Vec{1.0}, Vec{1.0}, e), expected, 1e-10);
}

TEST(FdHvp, KernelReferenceMoments) {
  auto k = fd::kernel_average_reference([](double t) { return t * t; }, 0.5);
  EXPECT_NEAR(k.normalization, 1.0, 1e-14);
  EXPECT_NEAR(k.first_moment, 0.0, 1e-15);
  EXPECT_NEAR(k.value, 0.25 / 6.0, 1e-14);
}

TEST(FdHvp, OptimalEpsilonAndFallback) {
  fd::NoiseModel nm;
  nm.grad_norm = 1.0;
  nm.d3_grad_norm = 1.0;
  EXPECT_NEAR(fd::optimal_epsilon(nm, 1e-15).epsilon, 1e-5, 1e-18);
  nm.d3_grad_norm = 0.0;
  auto s = fd::optimal_epsilon(nm, 1e-15);
  EXPECT_TRUE(s.fallback);
  EXPECT_NEAR(s.epsilon, 1e-5, 1e-18);
  fd::NoiseModel f;
  f.sigma_f = 1e-8;
  f.d4_norm = 1.0;
  EXPECT_NEAR(fd::optimal_epsilon_function_noise(f).epsilon, 1e-2, 1e-15);
}

TEST(FdHvp, SweepIsOrderedAndSummarised) {
  auto r = make_rippled({0.0, 40.0, 1, 1.0});
  auto grid = fd::default_epsilon_grid();
  ASSERT_EQ(grid.size(), 41u);
  auto pts = fd::fd_error_sweep(*r, Vec{1.0}, Vec{1.0}, grid, {});
  ASSERT_EQ(pts.size(), grid.size());
  EXPECT_TRUE(std::is_sorted(pts.begin(), pts.end(),
                             [](auto& a, auto& b) { return a.epsilon < b.epsilon; }));
  auto s = fd::summarize_sweep(pts);
  ASSERT_TRUE(s.slope_above.has_value());
  EXPECT_NEAR(*s.slope_above, 2.0, 0.2);
}

TEST(ExactSum, OrderIndependent) {
  Vec xs{1e16, 1.0, -1e16, 3.0, 1e-8, -2.5e15, 2.5e15};
  numerics::ExactSum a, b;
  for (double x : xs) a.add(x);
  std::reverse(xs.begin(), xs.end());
  for (double x : xs) b.add(x);
  EXPECT_EQ(a.value(), b.value());
  EXPECT_EQ(a.value(), 4.00000001);
}

TEST(ExactSum, VectorOffsetAndScale) {
  numerics::ExactVectorSum s(3);
  s.add(Vec{1.0, 2.0}, 2.0, 1);
  s.add(Vec{0.5}, -1.0, 0);
  EXPECT_EQ(s.value(), (Vec{-0.5, 2.0, 4.0}));
}

TEST(Numerics, GaussLegendreIntegratesPolynomials) {
  auto rule = numerics::gauss_legendre(5, 0.0, 2.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < 5; ++i) sum += rule.weights[i] * std::pow(rule.nodes[i], 9);
  EXPECT_NEAR(sum, std::pow(2.0, 10) / 10.0, 1e-10);
}

TEST(Numerics, LogLogSlope) {
  Vec x = numerics::logspace(1e-3, 1.0, 7), y;
  for (double t : x) y.push_back(3.0 * t * t);
  EXPECT_NEAR(numerics::fit_loglog(x, y).slope, 2.0, 1e-12);
}

TEST(Precision, Bf16Rounding) {
  EXPECT_EQ(round_to(1.0 + 1.0 / 512, Precision::bf16), 1.0);
  EXPECT_EQ(round_to(1.0 + 3.0 / 128, Precision::bf16), 1.0 + 3.0 / 128);
  EXPECT_EQ(round_to(1.0 + 3.0 / 256, Precision::bf16), 1.0 + 2.0 / 128);  // tie to even
  EXPECT_THROW(parse_precision("fp8"), std::invalid_argument);
}

}  // namespace
}  // namespace curvkit
