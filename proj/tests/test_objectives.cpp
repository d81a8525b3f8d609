// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "curvkit/fdhvp.hpp"
#include "curvkit/numerics.hpp"
#include "curvkit/objectives.hpp"

namespace curvkit {
namespace {

Vec normal_vec(std::size_t n, std::uint64_t seed) {
  Vec v(n);
  Rng(seed).fill_normal(v);
  return v;
}

// Central difference of the gradient coordinate-wise, used as a loose check
// of analytic gradients.
Vec numeric_gradient(const Objective& obj, Vec x) {
  Vec g(x.size());
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = obj.loss(x);
    x[i] = x0 - h;
    const double fm = obj.loss(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

TEST(Objectives, QuadraticGradientIsAx) {
  auto a = random_symmetric(7, 3);
  auto q = make_quadratic({a});
  Vec x = normal_vec(7, 4);
  EXPECT_LT(rel_error(q->gradient(x), a.multiply(x)), 1e-14);
  EXPECT_NEAR(q->loss(x), 0.5 * dot(x, a.multiply(x)), 1e-12);
}

TEST(Objectives, QuadraticRejectsAsymmetric) {
  DenseMatrix a(2);
  a(0, 1) = 1.0;
  EXPECT_THROW(make_quadratic({a}), std::invalid_argument);
}

TEST(Objectives, RandomSpdIsPositive) {
  auto a = random_spd(12, 9);
  Vec ev = numerics::symmetric_eigenvalues(a.data, a.n);
  EXPECT_GT(ev.front(), 0.0);
  EXPECT_TRUE(a.is_symmetric());
}

TEST(Objectives, CoupledMatrixZeroCouplingIsBlockDiagonal) {
  auto a = coupled_block_matrix(12, 3, 0.0, 1);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 12; ++j)
      if (i / 4 != j / 4) EXPECT_EQ(a(i, j), 0.0);
}

TEST(Objectives, RippledDerivativesMatchNumeric) {
  auto r = make_rippled({0.05, 40.0, 2, 1.0});
  Vec x{0.3, -0.2};
  EXPECT_LT(rel_error(r->gradient(x), numeric_gradient(*r, x)), 1e-7);
  auto h = r->exact_hessian(x);
  ASSERT_TRUE(h.has_value());
  const double w = 40.0, b = 0.05;
  EXPECT_NEAR((*h)(0, 1), b * w * w * std::cos(w * 0.3) * std::cos(w * -0.2), 1e-12);
  EXPECT_NEAR((*h)(0, 0), 1.0 - b * w * w * std::sin(w * 0.3) * std::sin(w * -0.2), 1e-12);
}

TEST(Objectives, Rippled1DIsSinePlusRipple) {
  auto r = make_rippled({0.0, 40.0, 1, 1.0});
  Vec x{1.0};
  EXPECT_DOUBLE_EQ(r->loss(x), std::sin(1.0));
  EXPECT_NEAR(*r->exact_curvature(x, Vec{1.0}), -std::sin(1.0), 1e-15);
}

TEST(Objectives, MlpGradientMatchesNumeric) {
  auto mlp = make_mlp({3, 5, 2}, {24, 3, {}}, 11);
  Vec x = mlp->initial_parameters(11);
  EXPECT_LT(rel_error(mlp->gradient(x), numeric_gradient(*mlp, x)), 1e-6);
}

TEST(Objectives, MlpExactCurvatureMatchesSecondDifference) {
  auto mlp = make_mlp({4, 8, 8, 1}, {32, 4, {}}, 7);
  Vec x = mlp->initial_parameters(7);
  Vec v = normal_vec(mlp->dim(), 5);
  const double c = *mlp->exact_curvature(x, v);
  EXPECT_NEAR(fd::second_difference(*mlp, x, v, 1e-4), c, 1e-5 * std::abs(c) + 1e-8);
}

TEST(Objectives, MlpLayoutAndBatches) {
  auto mlp = make_mlp({4, 8, 8, 1}, {30, 4, {}}, 1);
  EXPECT_EQ(mlp->dim(), 4u * 8 + 8 + 8 * 8 + 8 + 8 + 1);
  EXPECT_EQ(mlp->layer_offsets(), (std::vector<std::size_t>{0, 40, 112, 121}));
  EXPECT_EQ(mlp->batch_begin(1), 8u);  // 8, 8, 7, 7
  EXPECT_EQ(mlp->batch_end(3), 30u);
}

TEST(Objectives, WeightsAreNormalised) {
  Dataset d = make_regression_dataset(2, 1, 12, 3);
  MlpObjective mlp({2, 3, 1}, d, 3, Vec{1.0, 2.0, 5.0});
  EXPECT_NEAR(mlp.weight_sum(), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(mlp.batch_weights()[2], 0.625);
}

TEST(Objectives, SplitBoundaries) {
  EXPECT_EQ(split_boundaries(10, 3), (std::vector<std::size_t>{0, 4, 7, 10}));
}

}  // namespace
}  // namespace curvkit
