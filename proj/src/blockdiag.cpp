// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "curvkit/blockdiag.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "curvkit/numerics.hpp"
#include "curvkit/rng.hpp"

namespace curvkit::blockdiag {

BlockPartition::BlockPartition(std::vector<std::size_t> boundaries) : bounds_(std::move(boundaries)) {
  if (bounds_.size() < 2 || bounds_.front() != 0)
    throw std::invalid_argument("block partition: boundaries must start at 0 and hold at least one block");
  for (std::size_t i = 1; i < bounds_.size(); ++i)
    if (bounds_[i] <= bounds_[i - 1]) throw std::invalid_argument("block partition: blocks must be nonempty");
}

BlockPartition BlockPartition::equal(std::size_t dim, std::size_t blocks) {
  if (blocks == 0 || blocks > dim) throw std::invalid_argument("block partition: need 1 <= blocks <= dim");
  return BlockPartition(split_boundaries(dim, blocks));
}

BlockPartition BlockPartition::layers(const MlpObjective& mlp) { return BlockPartition(mlp.layer_offsets()); }

Vec mask_probe(std::span<const double> v, const BlockPartition& partition, std::size_t block) {
  if (v.size() != partition.dim()) throw std::invalid_argument("mask_probe: vector does not match partition");
  if (block >= partition.size()) throw std::invalid_argument("mask_probe: block index out of range");
  Vec out(v.size(), 0.0);
  std::copy(v.begin() + static_cast<std::ptrdiff_t>(partition.begin(block)),
            v.begin() + static_cast<std::ptrdiff_t>(partition.end(block)),
            out.begin() + static_cast<std::ptrdiff_t>(partition.begin(block)));
  return out;
}

HvpFn exact_hvp_fn(const Objective& objective, Vec theta) {
  if (!objective.exact_hvp(theta, Vec(objective.dim(), 0.0)))
    throw std::invalid_argument("exact products requested but the objective has no closed-form Hessian");
  return [&objective, theta = std::move(theta)](std::span<const double> v) { return *objective.exact_hvp(theta, v); };
}

HvpFn fd_hvp_fn(const Objective& objective, Vec theta, fd::FdConfig cfg) {
  cfg.validate();
  return [&objective, theta = std::move(theta), cfg](std::span<const double> v) {
    return fd::hvp_central(objective, std::span<const double>(theta), v, cfg);
  };
}

HvpFn sharded_hvp_fn(sharded::ShardedOperator& op) {
  return [&op](std::span<const double> v) {
    Vec out(v.size());
    op.apply(v, out);
    return out;
  };
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm2(a), nb = norm2(b);
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

namespace {

Summary summarize(const Vec& xs) {
  Summary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  s.mean = numerics::mean(xs);
  s.std = numerics::stddev(xs);
  return s;
}

}  // namespace

BlockStats block_diag_test(std::size_t dim, const HvpFn& hvp, const BlockPartition& partition,
                           const BlockDiagConfig& cfg) {
  if (partition.dim() != dim) throw std::invalid_argument("block_diag_test: partition does not cover the parameters");
  if (cfg.probes == 0) throw std::invalid_argument("block_diag_test: need at least one probe");
  BlockStats stats;
  stats.probes = cfg.probes;
  stats.blocks = partition.size();
  stats.epsilon = cfg.epsilon;

  for (std::size_t j = 0; j < cfg.probes; ++j) {
    Vec v(dim);
    Rng(cfg.seed, j).fill_normal(v);
    scale(1.0 / norm2(v), v);
    const Vec full = hvp(v);
    if (full.size() != dim) throw std::runtime_error("block_diag_test: product has the wrong length");
    for (std::size_t b = 0; b < partition.size(); ++b) {
      const Vec masked = hvp(mask_probe(v, partition, b));
      const auto lo = static_cast<std::ptrdiff_t>(partition.begin(b));
      const auto hi = static_cast<std::ptrdiff_t>(partition.end(b));
      const std::span<const double> fb(full.begin() + lo, full.begin() + hi);
      const std::span<const double> mb(masked.begin() + lo, masked.begin() + hi);
      BlockRecord r;
      r.probe = j;
      r.block = b;
      r.full_norm = norm2(fb);
      double sq = 0.0;
      for (std::size_t i = 0; i < fb.size(); ++i) sq += (fb[i] - mb[i]) * (fb[i] - mb[i]);
      r.abs_diff = std::sqrt(sq);
      r.degenerate = r.full_norm < cfg.degenerate_threshold;
      r.rel_error = r.degenerate ? 0.0 : r.abs_diff / r.full_norm;
      r.cosine = cosine(fb, mb);
      if (r.degenerate) ++stats.degenerate;
      stats.records.push_back(r);
    }
  }

  Vec joint_rel, joint_cos;
  std::vector<Vec> block_rel(stats.blocks), block_cos(stats.blocks);
  std::vector<Vec> probe_rel(stats.probes), probe_cos(stats.probes);
  for (const auto& r : stats.records) {
    if (!r.degenerate) {
      joint_rel.push_back(r.rel_error);
      block_rel[r.block].push_back(r.rel_error);
      probe_rel[r.probe].push_back(r.rel_error);
    }
    joint_cos.push_back(r.cosine);
    block_cos[r.block].push_back(r.cosine);
    probe_cos[r.probe].push_back(r.cosine);
  }
  stats.joint = {summarize(joint_rel), summarize(joint_cos)};

  auto means = [](const std::vector<Vec>& groups) {
    Vec out;
    for (const auto& g : groups)
      if (!g.empty()) out.push_back(numerics::mean(g));
    return out;
  };
  stats.over_blocks = {summarize(means(block_rel)), summarize(means(block_cos))};
  stats.over_probes = {summarize(means(probe_rel)), summarize(means(probe_cos))};
  for (std::size_t b = 0; b < stats.blocks; ++b)
    stats.per_block.push_back({summarize(block_rel[b]), summarize(block_cos[b])});
  return stats;
}

std::string block_csv(const BlockStats& stats) {
  std::ostringstream os;
  os << std::setprecision(17) << "probe,block,full_norm,abs_diff,rel_error,cosine,degenerate\n";
  for (const auto& r : stats.records)
    os << r.probe << ',' << r.block << ',' << r.full_norm << ',' << r.abs_diff << ',' << r.rel_error << ','
       << r.cosine << ',' << (r.degenerate ? 1 : 0) << '\n';
  return os.str();
}

}  // namespace curvkit::blockdiag
