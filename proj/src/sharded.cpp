// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "curvkit/sharded.hpp"

#include <cmath>
#include <cstring>
#include <exception>
#include <thread>

namespace curvkit::sharded {

std::string to_string(CollectiveKind kind) {
  switch (kind) {
    case CollectiveKind::allreduce_scalar: return "allreduce_scalar";
    case CollectiveKind::reduce_scatter_stub: return "reduce_scatter_stub";
    case CollectiveKind::allgather_stub: return "allgather_stub";
  }
  return "?";
}

// ------------------------------------------------------------------ layout

std::vector<Vec> ShardLayout::scatter(std::span<const double> full) const {
  if (full.size() != total_dim) throw std::invalid_argument("scatter: length does not match layout");
  std::vector<Vec> out(rank_count);
  for (std::size_t r = 0; r < rank_count; ++r)
    out[r].assign(full.begin() + static_cast<std::ptrdiff_t>(begin(r)),
                  full.begin() + static_cast<std::ptrdiff_t>(end(r)));
  return out;
}

Vec ShardLayout::gather(const std::vector<Vec>& shards) const {
  if (shards.size() != rank_count) throw std::invalid_argument("gather: wrong shard count");
  Vec full;
  full.reserve(total_dim);
  for (std::size_t r = 0; r < rank_count; ++r) {
    if (shards[r].size() != shard_size(r)) throw std::invalid_argument("gather: shard size mismatch");
    full.insert(full.end(), shards[r].begin(), shards[r].end());
  }
  return full;
}

ShardLayout partition(std::size_t total_dim, std::size_t rank_count) {
  if (rank_count == 0) throw std::invalid_argument("partition: need at least one rank");
  if (rank_count > total_dim) throw std::invalid_argument("partition: more ranks than parameters");
  ShardLayout layout;
  layout.total_dim = total_dim;
  layout.rank_count = rank_count;
  layout.boundaries = split_boundaries(total_dim, rank_count);
  return layout;
}

// ------------------------------------------------------------ communicator

CollectiveError::CollectiveError(CollectiveKind kind, std::size_t rank)
    : std::runtime_error("collective " + to_string(kind) + " timed out waiting for rank " +
                         std::to_string(rank)),
      kind_(kind),
      rank_(rank) {}

Communicator::Communicator(std::size_t ranks, ReductionOrder order) : ranks_(ranks), order_(order) {
  if (ranks == 0) throw std::invalid_argument("communicator: need at least one rank");
}

namespace {

template <typename T>
void require_all(CollectiveKind kind, std::span<const std::optional<T>> slots, std::size_t ranks) {
  if (slots.size() != ranks) throw std::invalid_argument("collective: one slot per rank required");
  for (std::size_t r = 0; r < ranks; ++r)
    if (!slots[r]) throw CollectiveError(kind, r);
}

double tree_sum(std::span<const std::optional<double>> xs) {
  if (xs.size() == 1) return *xs[0];
  const std::size_t half = xs.size() / 2;
  return tree_sum(xs.first(half)) + tree_sum(xs.subspan(half));
}

}  // namespace

double Communicator::allreduce_scalar(std::span<const std::optional<double>> contributions) {
  require_all(CollectiveKind::allreduce_scalar, contributions, ranks_);
  ++counters_.allreduce_scalar;
  counters_.scalar_payload_bytes += sizeof(double) * ranks_;
  if (order_ == ReductionOrder::tree) return tree_sum(contributions);
  double s = *contributions[0];
  for (std::size_t r = 1; r < ranks_; ++r) s += *contributions[r];
  return s;
}

double Communicator::allreduce_exact(std::span<const std::optional<numerics::ExactSum>> contributions) {
  require_all(CollectiveKind::allreduce_scalar, contributions, ranks_);
  ++counters_.allreduce_scalar;
  numerics::ExactSum total;
  for (const auto& c : contributions) {
    counters_.scalar_payload_bytes += sizeof(double) * c->terms();
    total.merge(*c);
  }
  return total.value();
}

void Communicator::count_stub(CollectiveKind kind, std::uint64_t bytes) {
  if (kind == CollectiveKind::allgather_stub) ++counters_.allgather_stub;
  else ++counters_.reduce_scatter_stub;
  counters_.stub_payload_bytes += bytes;
  if (pass_depth_ == 0) ++counters_.extra_parameter_sized;
}

void Communicator::reduce_scatter(std::span<const std::optional<Vec>> contributions, const ShardLayout& layout,
                                  std::vector<numerics::ExactVectorSum>& buffers, double sign) {
  require_all(CollectiveKind::reduce_scatter_stub, contributions, ranks_);
  if (layout.rank_count != ranks_ || buffers.size() != ranks_)
    throw std::invalid_argument("reduce_scatter: layout/communicator mismatch");
  for (std::size_t r = 0; r < ranks_; ++r) {
    if (contributions[r]->size() != layout.total_dim) throw std::invalid_argument("reduce_scatter: contribution length");
    if (buffers[r].size() != layout.shard_size(r)) throw std::invalid_argument("reduce_scatter: buffer length");
  }
  for (std::size_t dst = 0; dst < ranks_; ++dst) {
    const std::size_t lo = layout.begin(dst), len = layout.shard_size(dst);
    for (std::size_t src = 0; src < ranks_; ++src)
      buffers[dst].add(std::span<const double>(*contributions[src]).subspan(lo, len), sign);
  }
  count_stub(CollectiveKind::reduce_scatter_stub, sizeof(double) * layout.total_dim);
}

Vec Communicator::allgather(std::span<const std::optional<Vec>> shards, const ShardLayout& layout) {
  require_all(CollectiveKind::allgather_stub, shards, ranks_);
  std::vector<Vec> plain(ranks_);
  for (std::size_t r = 0; r < ranks_; ++r) plain[r] = *shards[r];
  count_stub(CollectiveKind::allgather_stub, sizeof(double) * layout.total_dim);
  return layout.gather(plain);
}

void Communicator::begin_gradient_pass() {
  ++pass_depth_;
  ++counters_.gradient_passes;
}

void Communicator::end_gradient_pass() {
  if (pass_depth_ > 0) --pass_depth_;
}

// -------------------------------------------------------------- scheduling

void run_phase(std::size_t ranks, Schedule schedule, const std::function<void(std::size_t)>& body) {
  if (schedule == Schedule::sequential || ranks == 1) {
    for (std::size_t r = 0; r < ranks; ++r) body(r);
    return;
  }
  std::vector<std::exception_ptr> errors(ranks);
  {
    std::vector<std::jthread> workers;
    workers.reserve(ranks);
    for (std::size_t r = 0; r < ranks; ++r) {
      workers.emplace_back([&, r] {
        try {
          body(r);
        } catch (...) {
          errors[r] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

LoaderSlices round_robin(std::size_t batches, std::size_t ranks) {
  if (ranks == 0) throw std::invalid_argument("round_robin: need at least one rank");
  LoaderSlices slices(ranks);
  for (std::size_t b = 0; b < batches; ++b) slices[b % ranks].push_back(b);
  return slices;
}

// ------------------------------------------------------------- sharded HVP

namespace {

void validate(const Objective& objective, const std::vector<Vec>& theta_shards,
              const std::vector<Vec>& v_shards, const ShardLayout& layout, const LoaderSlices& slices,
              const Communicator& comm) {
  const std::size_t ranks = layout.rank_count;
  if (layout.total_dim != objective.dim()) throw std::invalid_argument("sharded_hvp: layout does not cover the objective");
  if (comm.size() != ranks) throw std::invalid_argument("sharded_hvp: communicator size differs from layout");
  if (theta_shards.size() != ranks || v_shards.size() != ranks || slices.size() != ranks)
    throw std::invalid_argument("sharded_hvp: one shard and one loader slice per rank required");
  for (std::size_t r = 0; r < ranks; ++r) {
    if (theta_shards[r].size() != layout.shard_size(r) || v_shards[r].size() != layout.shard_size(r))
      throw std::invalid_argument("sharded_hvp: shard " + std::to_string(r) + " does not match layout");
  }
  std::vector<int> seen(objective.batch_count(), 0);
  for (const auto& s : slices) {
    for (std::size_t b : s) {
      if (b >= seen.size()) throw std::invalid_argument("sharded_hvp: loader slice names unknown batch");
      ++seen[b];
    }
  }
  for (int c : seen)
    if (c != 1) throw std::invalid_argument("sharded_hvp: loader slices must partition the batches");
}

}  // namespace

std::vector<Vec> sharded_hvp(const Objective& objective, std::vector<Vec>& theta_shards,
                             const std::vector<Vec>& v_shards, const ShardLayout& layout,
                             const LoaderSlices& slices, Communicator& comm,
                             const ShardedOptions& opts) {
  opts.fd.validate();
  validate(objective, theta_shards, v_shards, layout, slices, comm);
  const std::size_t ranks = layout.rank_count;
  const Precision precision = opts.fd.precision;
  const auto weights = objective.batch_weights();
  auto alive = [&](std::size_t r) { return !(opts.dropped_rank && *opts.dropped_rank == r); };

  double vnorm = 1.0;
  if (opts.fd.normalize_probe) {
    std::vector<std::optional<numerics::ExactSum>> partial(ranks);
    run_phase(ranks, opts.schedule, [&](std::size_t r) {
      numerics::ExactSum sq;
      for (double x : v_shards[r]) sq.add(x * x);
      partial[r] = std::move(sq);
    });
    vnorm = std::sqrt(comm.allreduce_exact(partial));
    if (vnorm == 0.0) {
      std::vector<Vec> zeros(ranks);
      for (std::size_t r = 0; r < ranks; ++r) zeros[r].assign(layout.shard_size(r), 0.0);
      return zeros;
    }
  }

  std::vector<Vec> step(ranks), snapshot(theta_shards);
  std::vector<numerics::ExactVectorSum> buffers;
  for (std::size_t r = 0; r < ranks; ++r) buffers.emplace_back(layout.shard_size(r));
  run_phase(ranks, opts.schedule, [&](std::size_t r) {
    step[r] = v_shards[r];
    if (opts.fd.normalize_probe)
      for (double& x : step[r]) x /= vnorm;
    for (double& x : step[r]) x *= opts.fd.epsilon;
  });

  std::size_t steps = 0;
  for (const auto& s : slices) steps = std::max(steps, s.size());

  auto gradient_pass = [&](double sign, const char* where) {
    comm.begin_gradient_pass();
    for (std::size_t k = 0; k < steps; ++k) {
      std::vector<std::optional<Vec>> gather_in(ranks);
      for (std::size_t r = 0; r < ranks; ++r)
        if (alive(r)) gather_in[r] = theta_shards[r];
      const Vec full_theta = comm.allgather(gather_in, layout);

      std::vector<std::optional<Vec>> contrib(ranks);
      run_phase(ranks, opts.schedule, [&](std::size_t r) {
        if (!alive(r)) return;
        Vec c(layout.total_dim, 0.0);
        if (k < slices[r].size()) {
          const std::size_t b = slices[r][k];
          Vec g(layout.total_dim);
          objective.eval_batch(full_theta, b, g);
          round_in_place(g, precision);
          if (!all_finite(g)) throw NonFiniteGradient(b, where);
          for (std::size_t i = 0; i < g.size(); ++i) c[i] = weights[b] * g[i];
        }
        contrib[r] = std::move(c);
      });
      comm.reduce_scatter(contrib, layout, buffers, sign);
    }
    comm.end_gradient_pass();
  };

  try {
    run_phase(ranks, opts.schedule, [&](std::size_t r) {
      for (std::size_t i = 0; i < step[r].size(); ++i) theta_shards[r][i] += step[r][i];
      round_in_place(theta_shards[r], precision);
    });
    gradient_pass(+1.0, "forward point");
    run_phase(ranks, opts.schedule, [&](std::size_t r) {
      for (std::size_t i = 0; i < step[r].size(); ++i) theta_shards[r][i] -= 2.0 * step[r][i];
      round_in_place(theta_shards[r], precision);
    });
    gradient_pass(-1.0, "backward point");
  } catch (...) {
    comm.end_gradient_pass();
    theta_shards = snapshot;
    throw;
  }
  theta_shards = std::move(snapshot);

  // Weights are normalised, so dividing by 2 eps sum_b w_b matches the
  // unsharded estimator.
  const double factor = vnorm / (2.0 * opts.fd.epsilon * objective.weight_sum());
  std::vector<Vec> acc(ranks);
  run_phase(ranks, opts.schedule, [&](std::size_t r) {
    acc[r] = buffers[r].value();
    for (double& x : acc[r]) x *= factor;
  });
  return acc;
}

// -------------------------------------------------------- sharded operator

ShardedOperator::ShardedOperator(const Objective& objective, Vec theta, ShardLayout layout,
                                 LoaderSlices slices, Communicator& comm, ShardedOptions opts)
    : objective_(objective),
      theta_shards_(layout.scatter(theta)),
      layout_(std::move(layout)),
      slices_(std::move(slices)),
      comm_(comm),
      opts_(opts) {}

void ShardedOperator::apply(std::span<const double> in, std::span<double> out) {
  const auto v_shards = layout_.scatter(in);
  const auto result = sharded_hvp(objective_, theta_shards_, v_shards, layout_, slices_, comm_, opts_);
  const Vec full = layout_.gather(result);
  std::copy(full.begin(), full.end(), out.begin());
}

double ShardedOperator::dot(std::span<const double> a, std::span<const double> b) {
  std::vector<std::optional<double>> partial(layout_.rank_count);
  run_phase(layout_.rank_count, opts_.schedule, [&](std::size_t r) {
    double s = 0.0;
    for (std::size_t i = layout_.begin(r); i < layout_.end(r); ++i) s += a[i] * b[i];
    partial[r] = s;
  });
  return comm_.allreduce_scalar(partial);
}

// ------------------------------------------------------------------- audit

AuditReport collective_audit(const Communicator& comm, std::uint64_t steps_per_gradient_pass) {
  AuditReport report;
  report.counters = comm.counters();
  report.per_gradient_pass_allgathers = steps_per_gradient_pass;
  report.no_extra_parameter_collectives = report.counters.extra_parameter_sized == 0;
  return report;
}

std::uint64_t checksum(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double x : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &x, sizeof(double));
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace curvkit::sharded
