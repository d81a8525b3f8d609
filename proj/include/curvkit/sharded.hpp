// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// In-process simulation of the shard-local finite-difference HVP.
//
// Every rank owns one contiguous slice of theta and v. A rank program is a
// sequence of phases; between phases the driver runs exactly one collective
// over the per-rank contributions, which is the only synchronisation point.
// Phases run either sequentially in rank order or on one thread per rank;
// collectives reduce in fixed rank order, so both schedules produce the same
// bits.
//
// Gradient passes stand in for the FSDP forward/backward: the parameter
// all-gather and the gradient reduce-scatter they imply are counted as
// stub collectives scoped to a gradient pass. Anything O(P)-sized issued
// outside such a scope is counted as an extra collective.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "curvkit/fdhvp.hpp"
#include "curvkit/numerics.hpp"
#include "curvkit/objectives.hpp"
#include "curvkit/vec.hpp"

namespace curvkit::sharded {

struct ShardLayout {
  std::size_t total_dim = 0;
  std::size_t rank_count = 0;
  std::vector<std::size_t> boundaries;  // rank_count + 1 offsets

  std::size_t begin(std::size_t rank) const { return boundaries[rank]; }
  std::size_t end(std::size_t rank) const { return boundaries[rank + 1]; }
  std::size_t shard_size(std::size_t rank) const { return end(rank) - begin(rank); }

  std::vector<Vec> scatter(std::span<const double> full) const;
  Vec gather(const std::vector<Vec>& shards) const;
};

/// Contiguous shards; the first P mod R ranks get one extra entry.
/// Throws std::invalid_argument unless 1 <= R <= P.
ShardLayout partition(std::size_t total_dim, std::size_t rank_count);

enum class CollectiveKind { allreduce_scalar, reduce_scatter_stub, allgather_stub };

struct CollectiveCounters {
  std::uint64_t allreduce_scalar = 0;
  std::uint64_t reduce_scatter_stub = 0;
  std::uint64_t allgather_stub = 0;
  std::uint64_t scalar_payload_bytes = 0;
  std::uint64_t stub_payload_bytes = 0;
  /// Parameter-sized collectives issued outside a gradient pass.
  std::uint64_t extra_parameter_sized = 0;
  std::uint64_t gradient_passes = 0;
};

/// A collective found a rank without a contribution (simulated dropout).
class CollectiveError : public std::runtime_error {
 public:
  CollectiveError(CollectiveKind kind, std::size_t rank);
  std::size_t rank() const { return rank_; }
  CollectiveKind kind() const { return kind_; }

 private:
  CollectiveKind kind_;
  std::size_t rank_;
};

enum class ReductionOrder { fixed, tree };

/// Collective layer. Contributions arrive as one optional per rank; an empty
/// slot is a rank that never reached the collective and raises
/// CollectiveError (the simulator's stand-in for a timeout).
class Communicator {
 public:
  explicit Communicator(std::size_t ranks, ReductionOrder order = ReductionOrder::fixed);

  std::size_t size() const { return ranks_; }
  ReductionOrder order() const { return order_; }

  /// Sum broadcast to every rank. Fixed order is rank 0 -> R-1; tree order is
  /// pairwise and not bit-identical to fixed order.
  double allreduce_scalar(std::span<const std::optional<double>> contributions);
  /// Scalar all-reduce of exact partial sums; the result is the correctly
  /// rounded total whatever the rank count. Counted as a scalar all-reduce.
  double allreduce_exact(std::span<const std::optional<numerics::ExactSum>> contributions);
  /// Reduce-scatter of full-length vectors into each rank's high-precision
  /// buffer: rank r's shard of sign * sum of contributions is added exactly
  /// to buffers[r], so the outcome does not depend on the rank count.
  void reduce_scatter(std::span<const std::optional<Vec>> contributions, const ShardLayout& layout,
                      std::vector<numerics::ExactVectorSum>& buffers, double sign = 1.0);
  Vec allgather(std::span<const std::optional<Vec>> shards, const ShardLayout& layout);

  void begin_gradient_pass();
  void end_gradient_pass();

  const CollectiveCounters& counters() const { return counters_; }
  void reset_counters() { counters_ = {}; }

 private:
  void count_stub(CollectiveKind kind, std::uint64_t bytes);

  std::size_t ranks_;
  ReductionOrder order_;
  CollectiveCounters counters_;
  int pass_depth_ = 0;
};

enum class Schedule { sequential, threaded };

/// Runs one phase of a rank program for every rank.
void run_phase(std::size_t ranks, Schedule schedule, const std::function<void(std::size_t)>& body);

/// Batches assigned to each rank.
using LoaderSlices = std::vector<std::vector<std::size_t>>;

/// Batch b goes to rank b mod R.
LoaderSlices round_robin(std::size_t batches, std::size_t ranks);

struct ShardedOptions {
  fd::FdConfig fd;
  Schedule schedule = Schedule::sequential;
  /// Simulated failure: this rank stops contributing after the
  /// normalisation collective.
  std::optional<std::size_t> dropped_rank;
};

/// Shard-local central-difference HVP. On return each theta shard holds its
/// original bits and the result holds each rank's shard of Hv, scaled by
/// ||v|| / (2 eps sum_b w_b). With R = 1 the arithmetic is identical to
/// fd::hvp_central.
///
/// Throws std::invalid_argument on layout/shard/slice mismatch,
/// CollectiveError on dropout, NonFiniteGradient on a bad batch.
std::vector<Vec> sharded_hvp(const Objective& objective, std::vector<Vec>& theta_shards,
                             const std::vector<Vec>& v_shards, const ShardLayout& layout,
                             const LoaderSlices& slices, Communicator& comm,
                             const ShardedOptions& opts);

/// Matrix-free operator bundling a sharded HVP with sharded inner products,
/// for use by Krylov routines. Vectors are full-length; every dot product
/// is a set of shard-local partial sums followed by one scalar all-reduce.
class ShardedOperator {
 public:
  ShardedOperator(const Objective& objective, Vec theta, ShardLayout layout, LoaderSlices slices,
                  Communicator& comm, ShardedOptions opts);

  std::size_t dim() const { return layout_.total_dim; }
  void apply(std::span<const double> in, std::span<double> out);
  double dot(std::span<const double> a, std::span<const double> b);
  const std::vector<Vec>& theta_shards() const { return theta_shards_; }

 private:
  const Objective& objective_;
  std::vector<Vec> theta_shards_;
  ShardLayout layout_;
  LoaderSlices slices_;
  Communicator& comm_;
  ShardedOptions opts_;
};

struct AuditReport {
  CollectiveCounters counters;
  std::uint64_t per_gradient_pass_allgathers = 0;
  bool no_extra_parameter_collectives = true;
};

/// Summarises a communicator's counters after an instrumented run.
AuditReport collective_audit(const Communicator& comm, std::uint64_t steps_per_gradient_pass);

/// FNV-1a over the raw bytes of the doubles.
std::uint64_t checksum(std::span<const double> values);

std::string to_string(CollectiveKind kind);

}  // namespace curvkit::sharded
