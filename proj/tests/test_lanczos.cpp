// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "curvkit/lanczos.hpp"
#include "curvkit/numerics.hpp"

namespace curvkit::krylov {
namespace {

Vec range(std::size_t n) {
  Vec d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = static_cast<double>(i + 1);
  return d;
}

TEST(Lanczos, ReorthParse) {
  EXPECT_EQ(ReorthPolicy::parse("none").kind, ReorthPolicy::Kind::none);
  auto w = ReorthPolicy::parse("window:3");
  EXPECT_EQ(w.kind, ReorthPolicy::Kind::window);
  EXPECT_EQ(w.window, 3u);
  EXPECT_EQ(w.to_string(), "window:3");
  EXPECT_EQ(w.width(10), 3u);
  EXPECT_EQ(w.width(2), 2u);
  EXPECT_THROW(ReorthPolicy::parse("window:x"), std::invalid_argument);
  EXPECT_THROW(ReorthPolicy::parse("partial"), std::invalid_argument);
}

TEST(Lanczos, SingleStepIsRayleighQuotient) {
  DiagonalOperator op(Vec{1.0, 2.0, 3.0});
  LanczosConfig cfg;
  cfg.m = 1;
  auto r = lanczos(op, Vec{1.0, 1.0, 1.0}, cfg);
  ASSERT_EQ(r.t.size(), 1u);
  EXPECT_NEAR(r.t.alpha[0], 2.0, 1e-15);
}

TEST(Lanczos, FullRunRecoversSpectrum) {
  DiagonalOperator op(range(20));
  LanczosConfig cfg;
  cfg.m = 20;
  auto r = lanczos(op, Vec(20, 1.0), cfg);
  auto rp = ritz(r.t);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(rp.values[i], i + 1.0, 1e-10);
  double wsum = 0.0;
  for (double w : rp.weights) wsum += w;
  EXPECT_NEAR(wsum, 1.0, 1e-13);
}

TEST(Lanczos, BreakdownOnInvariantSubspace) {
  DiagonalOperator op(range(10));
  Vec start(10, 0.0);
  start[0] = start[4] = 1.0;
  LanczosConfig cfg;
  cfg.m = 6;
  auto r = lanczos(op, start, cfg);
  EXPECT_TRUE(r.breakdown);
  EXPECT_EQ(r.steps, 2u);
}

TEST(Lanczos, InvalidArguments) {
  DiagonalOperator op(range(4));
  LanczosConfig cfg;
  cfg.m = 5;
  EXPECT_THROW(lanczos(op, Vec(4, 1.0), cfg), std::invalid_argument);
  cfg.m = 2;
  EXPECT_THROW(lanczos(op, Vec(4, 0.0), cfg), std::invalid_argument);
  cfg.no_basis_storage = true;
  EXPECT_THROW(lanczos(op, Vec(4, 1.0), cfg), std::invalid_argument);
  cfg.reorth = ReorthPolicy::none();
  EXPECT_NO_THROW(lanczos(op, Vec(4, 1.0), cfg));
}

TEST(Lanczos, NoBasisStorageMatchesPlainRecurrence) {
  DiagonalOperator op(range(30));
  LanczosConfig a;
  a.m = 10;
  a.reorth = ReorthPolicy::none();
  LanczosConfig b = a;
  b.no_basis_storage = true;
  auto ra = lanczos(op, Vec(30, 1.0), a);
  auto rb = lanczos(op, Vec(30, 1.0), b);
  EXPECT_TRUE(rb.basis.empty());
  EXPECT_LT(tridiagonal_distance(ra.t, rb.t), 1e-14);
}

TEST(Lanczos, RitzWithZeroOffDiagonal) {
  Tridiagonal t{{3.0, 1.0}, {0.0}};
  auto r = ritz(t);
  EXPECT_EQ(r.values, (Vec{1.0, 3.0}));
  EXPECT_NEAR(r.weights[1], 1.0, 1e-15);
  EXPECT_NEAR(r.weights[0], 0.0, 1e-15);
}

TEST(Slq, TraceOfDiagonal) {
  DiagonalOperator op(range(32));
  SlqConfig cfg;
  cfg.lanczos.m = 32;
  cfg.probes = 1;
  auto d = slq_density(op, cfg);
  EXPECT_EQ(d.nodes.size(), 32u);
  EXPECT_GT(d.trace_estimate(), 0.0);
  cfg.probes = 200;
  cfg.lanczos.m = 8;
  cfg.distribution = ProbeDistribution::rademacher;
  auto many = slq_density(op, cfg);
  EXPECT_NEAR(many.trace_estimate(), 528.0, 0.1 * 528.0);
  EXPECT_NEAR(many.mass(-1e9, 1e9), 1.0, 1e-6);
}

TEST(Slq, TotalVariationOfSelfIsZero) {
  DiagonalOperator op(range(16));
  SlqConfig cfg;
  cfg.lanczos.m = 10;
  auto d = slq_density(op, cfg);
  EXPECT_NEAR(total_variation(d, d), 0.0, 1e-15);
}

TEST(Ghosts, ClusterDetectionAndReferenceFilter) {
  RitzPairs run{{1.0, 2.0, 2.0 + 1e-9, 5.0}, {0.25, 0.25, 1e-20, 0.5}};
  auto rep = ghost_detect(run, 1e-6);
  ASSERT_EQ(rep.clusters.size(), 1u);
  EXPECT_NEAR(rep.clusters[0].center, 2.0, 1e-8);
  RitzPairs genuine{{1.0, 2.0, 2.0 + 1e-9, 5.0}, {0.25, 0.25, 0.25, 0.25}};
  EXPECT_TRUE(ghost_detect(run, 1e-6, genuine).clusters.empty());
  EXPECT_NEAR(default_ghost_tol(Vec{-4.0, 2.0}), 4e-6, 1e-20);
}

TEST(NoiseScaling, ZeroNoiseGivesRoundoffOnly) {
  NoiseScalingConfig cfg;
  cfg.dim = 64;
  cfg.m_grid = {8, 16};
  cfg.sigma_grid = {0.0};
  cfg.sigma_for_m = 0.0;
  cfg.trials = 2;
  auto r = fd_lanczos_noise_scaling(cfg);
  for (auto& p : r.m_sweep) EXPECT_LT(p.mean_delta, 1e-10);
}

}  // namespace
}  // namespace curvkit::krylov
