// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "curvkit/blockdiag.hpp"

namespace curvkit::blockdiag {
namespace {

TEST(BlockDiag, PartitionValidation) {
  EXPECT_THROW(BlockPartition({1, 3}), std::invalid_argument);
  EXPECT_THROW(BlockPartition({0, 2, 2}), std::invalid_argument);
  auto p = BlockPartition::equal(10, 3);
  EXPECT_EQ(p.boundaries(), (std::vector<std::size_t>{0, 4, 7, 10}));
}

TEST(BlockDiag, LayerPartitionFollowsOffsets) {
  auto mlp = make_mlp({4, 8, 8, 1}, {32, 4, {}}, 7);
  auto p = BlockPartition::layers(*mlp);
  EXPECT_EQ(p.boundaries(), mlp->layer_offsets());
}

TEST(BlockDiag, MaskProbe) {
  auto p = BlockPartition::equal(4, 2);
  EXPECT_EQ(mask_probe(Vec{1, 2, 3, 4}, p, 1), (Vec{0, 0, 3, 4}));
}

TEST(BlockDiag, CosineConventions) {
  EXPECT_EQ(cosine(Vec{0, 0}, Vec{0, 0}), 1.0);
  EXPECT_EQ(cosine(Vec{0, 0}, Vec{1, 0}), 0.0);
  EXPECT_NEAR(cosine(Vec{1, 1}, Vec{2, 2}), 1.0, 1e-15);
}

TEST(BlockDiag, BlockDiagonalMatrixHasZeroError) {
  auto a = coupled_block_matrix(12, 3, 0.0, 4);
  auto q = make_quadratic({a});
  BlockDiagConfig cfg;
  cfg.probes = 5;
  auto stats = block_diag_test(12, exact_hvp_fn(*q, Vec(12, 0.0)), BlockPartition::equal(12, 3), cfg);
  EXPECT_EQ(stats.records.size(), 15u);
  EXPECT_LT(stats.joint.rel_error.mean, 1e-15);
  EXPECT_NEAR(stats.joint.cosine.mean, 1.0, 1e-14);
}

TEST(BlockDiag, CouplingRaisesError) {
  auto q = make_quadratic({coupled_block_matrix(12, 3, 1.0, 4)});
  BlockDiagConfig cfg;
  auto stats = block_diag_test(12, exact_hvp_fn(*q, Vec(12, 0.0)), BlockPartition::equal(12, 3), cfg);
  EXPECT_GT(stats.joint.rel_error.mean, 0.1);
  EXPECT_EQ(stats.per_block.size(), 3u);
}

TEST(BlockDiag, DegenerateBlocksAreCounted) {
  auto q = make_quadratic({DenseMatrix::diagonal(Vec{1.0, 1.0, 0.0, 0.0})});
  BlockDiagConfig cfg;
  cfg.probes = 3;
  auto stats = block_diag_test(4, exact_hvp_fn(*q, Vec(4, 0.0)), BlockPartition::equal(4, 2), cfg);
  EXPECT_EQ(stats.degenerate, 3u);
  EXPECT_EQ(stats.joint.rel_error.count, 3u);
}

}  // namespace
}  // namespace curvkit::blockdiag
