// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Block-diagonal Hessian test. For a unit probe v and a contiguous block b,
// compare the restriction of the full product (Hv)^(b) with the restriction
// of the masked product (H v^(b))^(b). Any difference comes from cross-block
// curvature.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "curvkit/fdhvp.hpp"
#include "curvkit/objectives.hpp"
#include "curvkit/sharded.hpp"
#include "curvkit/vec.hpp"

namespace curvkit::blockdiag {

/// Contiguous, nonempty, covering blocks of [0, P).
class BlockPartition {
 public:
  /// Throws std::invalid_argument unless boundaries start at 0 and strictly
  /// increase.
  explicit BlockPartition(std::vector<std::size_t> boundaries);

  /// `blocks` near-equal blocks, remainder first.
  static BlockPartition equal(std::size_t dim, std::size_t blocks);
  /// One block per layer, following the MLP flattening order.
  static BlockPartition layers(const MlpObjective& mlp);

  std::size_t size() const { return bounds_.size() - 1; }
  std::size_t dim() const { return bounds_.back(); }
  std::size_t begin(std::size_t b) const { return bounds_[b]; }
  std::size_t end(std::size_t b) const { return bounds_[b + 1]; }
  const std::vector<std::size_t>& boundaries() const { return bounds_; }

 private:
  std::vector<std::size_t> bounds_;
};

/// v with every entry outside block b set to zero. Not renormalised.
Vec mask_probe(std::span<const double> v, const BlockPartition& partition, std::size_t block);

/// Any Hessian-vector product routine: v -> Hv.
using HvpFn = std::function<Vec(std::span<const double>)>;

HvpFn exact_hvp_fn(const Objective& objective, Vec theta);
HvpFn fd_hvp_fn(const Objective& objective, Vec theta, fd::FdConfig cfg);
/// Products through the sharded executor; the operator must outlive the
/// returned function.
HvpFn sharded_hvp_fn(sharded::ShardedOperator& op);

struct BlockRecord {
  std::size_t probe = 0;
  std::size_t block = 0;
  double full_norm = 0.0;  // ||(Hv)^(b)||
  double abs_diff = 0.0;
  double rel_error = 0.0;  // abs_diff / full_norm; 0 when degenerate
  double cosine = 0.0;
  bool degenerate = false;  // full_norm below the threshold
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t count = 0;
};

struct MetricSummary {
  Summary rel_error;
  Summary cosine;
};

struct BlockStats {
  std::vector<BlockRecord> records;  // probe-major
  std::size_t probes = 0;
  std::size_t blocks = 0;
  double epsilon = 0.0;  // reported only; 0 for exact products
  std::size_t degenerate = 0;

  /// Every non-degenerate (probe, block) pair pooled.
  MetricSummary joint;
  /// Per-block means, summarised across blocks.
  MetricSummary over_blocks;
  /// Per-probe means, summarised across probes.
  MetricSummary over_probes;
  /// Per-block summaries across probes.
  std::vector<MetricSummary> per_block;
};

struct BlockDiagConfig {
  std::size_t probes = 10;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
  double degenerate_threshold = 1e-14;
};

/// Probe j is N(0, I) from Rng(seed, j), normalised to unit length. One full
/// product per probe is shared by all blocks; each block costs one masked
/// product. Degenerate blocks are excluded from the rel-error summaries and
/// counted separately; their cosine still enters the cosine summaries.
/// Cosine of two zero vectors is 1, of a zero and a nonzero vector 0.
BlockStats block_diag_test(std::size_t dim, const HvpFn& hvp, const BlockPartition& partition,
                           const BlockDiagConfig& cfg);

/// Cosine with the zero-vector conventions above, clamped to [-1, 1].
double cosine(std::span<const double> a, std::span<const double> b);

std::string block_csv(const BlockStats& stats);

}  // namespace curvkit::blockdiag
