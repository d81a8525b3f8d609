// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Symmetric Lanczos over matrix-free operators, Ritz extraction, stochastic
// Lanczos quadrature and ghost-eigenvalue diagnostics.
//
// All scalars (alpha, beta, inner products) are fp64. Only the stored basis
// vectors are rounded to the storage precision.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curvkit/fdhvp.hpp"
#include "curvkit/objectives.hpp"
#include "curvkit/precision.hpp"
#include "curvkit/rng.hpp"
#include "curvkit/sharded.hpp"
#include "curvkit/vec.hpp"

namespace curvkit::krylov {

// --------------------------------------------------------------- operators

/// Matrix-free symmetric operator. dot() is the inner product the Krylov
/// routine uses; distributed operators implement it as a reduced sum.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual std::size_t dim() const = 0;
  virtual void apply(std::span<const double> in, std::span<double> out) = 0;
  virtual double dot(std::span<const double> a, std::span<const double> b) { return curvkit::dot(a, b); }
};

class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(const DenseMatrix& a) : a_(a) {}
  std::size_t dim() const override { return a_.n; }
  void apply(std::span<const double> in, std::span<double> out) override { a_.multiply(in, out); }

 private:
  const DenseMatrix& a_;
};

/// Diagonal matrix, O(n) matvec.
class DiagonalOperator final : public LinearOperator {
 public:
  explicit DiagonalOperator(Vec diag) : d_(std::move(diag)) {}
  std::size_t dim() const override { return d_.size(); }
  void apply(std::span<const double> in, std::span<double> out) override;

 private:
  Vec d_;
};

/// The objective's closed-form Hessian-vector product at theta.
class ExactHvpOperator final : public LinearOperator {
 public:
  ExactHvpOperator(const Objective& objective, Vec theta);
  std::size_t dim() const override { return theta_.size(); }
  void apply(std::span<const double> in, std::span<double> out) override;

 private:
  const Objective& objective_;
  Vec theta_;
};

/// Gradient central-difference HVP at theta.
class FdHvpOperator final : public LinearOperator {
 public:
  FdHvpOperator(const Objective& objective, Vec theta, fd::FdConfig cfg);
  std::size_t dim() const override { return theta_.size(); }
  void apply(std::span<const double> in, std::span<double> out) override;

 private:
  const Objective& objective_;
  Vec theta_;
  fd::FdConfig cfg_;
};

/// Sharded FD-HVP; inner products go through the communicator.
class ShardedHvpOperator final : public LinearOperator {
 public:
  explicit ShardedHvpOperator(sharded::ShardedOperator& op) : op_(op) {}
  std::size_t dim() const override { return op_.dim(); }
  void apply(std::span<const double> in, std::span<double> out) override { op_.apply(in, out); }
  double dot(std::span<const double> a, std::span<const double> b) override { return op_.dot(a, b); }

 private:
  sharded::ShardedOperator& op_;
};

/// Adds i.i.d. N(0, (noise_norm^2) / dim) to every entry of every product,
/// so the perturbation has expected norm about noise_norm. A fresh draw is
/// made on every call.
class NoisyOperator final : public LinearOperator {
 public:
  NoisyOperator(LinearOperator& base, double noise_norm, std::uint64_t seed, std::uint64_t stream = 0);
  std::size_t dim() const override { return base_.dim(); }
  void apply(std::span<const double> in, std::span<double> out) override;
  double dot(std::span<const double> a, std::span<const double> b) override { return base_.dot(a, b); }

 private:
  LinearOperator& base_;
  double noise_norm_;
  Rng rng_;
};

// ------------------------------------------------------------------ config

struct ReorthPolicy {
  enum class Kind { none, window, full };
  Kind kind = Kind::full;
  std::size_t window = 0;  // used when kind == window

  /// Number of previous vectors each new vector is orthogonalised against.
  std::size_t width(std::size_t stored) const;
  std::string to_string() const;
  /// "none", "full" or "window:<r>"; throws std::invalid_argument otherwise.
  static ReorthPolicy parse(const std::string& text);
  static ReorthPolicy none() { return {Kind::none, 0}; }
  static ReorthPolicy full() { return {Kind::full, 0}; }
  static ReorthPolicy windowed(std::size_t r) { return {Kind::window, r}; }
};

struct LanczosConfig {
  std::size_t m = 30;
  ReorthPolicy reorth = ReorthPolicy::full();
  /// Repeat the Gram-Schmidt sweep once. Doubles the reorthogonalisation
  /// inner products, so it is off by default.
  bool two_pass = false;
  Precision storage = Precision::fp64;
  /// Keep only the two most recent vectors. Requires reorth == none.
  bool no_basis_storage = false;
  /// Breakdown when beta < breakdown_tol * (running estimate of ||T||).
  double breakdown_tol = 1e-10;
  /// Called at the start of iteration k and once more with k = steps at the
  /// end. Used by the collective audit.
  std::function<void(std::size_t)> on_iteration;
};

// ------------------------------------------------------------------ result

struct Tridiagonal {
  Vec alpha;  // m diagonal entries
  Vec beta;   // m - 1 off-diagonal entries
  std::size_t size() const { return alpha.size(); }
};

struct LanczosResult {
  Tridiagonal t;
  std::vector<Vec> basis;  // empty with no_basis_storage
  Precision storage = Precision::fp64;
  bool breakdown = false;
  std::size_t steps = 0;
  /// Norm of the last residual vector (the beta that would follow T).
  double residual = 0.0;
  /// Norms of the stored basis vectors at creation.
  Vec basis_norms;
};

/// Runs up to cfg.m steps from `start` (normalised internally).
/// Throws std::invalid_argument if m is 0 or exceeds dim, the start vector is
/// zero or mis-sized, or no_basis_storage is combined with reorthogonalisation.
LanczosResult lanczos(LinearOperator& op, std::span<const double> start, const LanczosConfig& cfg);

struct RitzPairs {
  Vec values;   // ascending
  Vec weights;  // squared first components, matching values
};

/// Eigenvalues of T and squared first components of its eigenvectors,
/// by implicit QL tracking only the first row of the eigenvector matrix.
/// Off-diagonal entries may be zero.
RitzPairs ritz(const Tridiagonal& t);

/// ||A - B||_2 for two tridiagonals of equal size.
double tridiagonal_distance(const Tridiagonal& a, const Tridiagonal& b);

/// (mean_k ||q_k||_inf^2)^-1 over the stored basis; 0 if none stored.
double eta_bar(const LanczosResult& result);

// --------------------------------------------------------------------- SLQ

enum class ProbeDistribution { gaussian, rademacher };

struct SlqConfig {
  LanczosConfig lanczos;
  std::size_t probes = 1;
  ProbeDistribution distribution = ProbeDistribution::gaussian;
  /// Gaussian bandwidth; default 0.01 times the node spread.
  std::optional<double> smoothing_sigma;
  std::uint64_t seed = 0;
};

struct ProbeRun {
  RitzPairs ritz;
  bool breakdown = false;
  std::size_t steps = 0;
  double eta_bar = 0.0;
};

struct SpectralDensity {
  Vec nodes;    // all probes' Ritz values, probe-major
  Vec weights;  // gamma_i / s
  std::size_t probes = 0;
  std::size_t dim = 0;
  double sigma = 0.0;
  bool breakdown = false;
  std::vector<ProbeRun> runs;

  /// dim * sum_i weights_i * nodes_i
  double trace_estimate() const;
  double evaluate(double lambda) const;
  /// Mass of the smoothed density on [lo, hi].
  double mass(double lo, double hi) const;
  /// [min node - 5 sigma, max node + 5 sigma]
  std::pair<double, double> support() const;
};

/// Probe j is drawn from Rng(seed, j); probes are merged in index order.
SpectralDensity slq_density(LinearOperator& op, const SlqConfig& cfg);

/// 1/2 integral |p - q| by the trapezoid rule on `points` nodes spanning both
/// supports.
double total_variation(const SpectralDensity& p, const SpectralDensity& q, std::size_t points = 8192);

std::string stem_csv(const SpectralDensity& d);
std::string density_csv(const SpectralDensity& d, std::size_t points = 512);

// ------------------------------------------------------------------ ghosts

struct GhostCluster {
  Vec values;
  Vec weights;
  double center = 0.0;
  double splitting = 0.0;  // max - min
  double weight_sum = 0.0;
};

struct GhostReport {
  double tol = 0.0;
  std::vector<GhostCluster> clusters;
};

/// max(1e-6, 2 eps_storage) * max |lambda|: 1e-6 ||H|| for fp64 and fp32
/// storage, wider for bf16 where Ritz values only resolve to about
/// eps_bf16 ||H||.
double default_ghost_tol(std::span<const double> values, Precision storage = Precision::fp64);

/// Groups sorted Ritz values whose neighbours are closer than tol (strict)
/// and keeps groups of two or more. Ghost copies often carry weights far
/// below the rounding level of the genuine copy, so weights are reported but
/// not used for the decision. With a reference run (e.g. full reorthogonalisation) a
/// cluster is kept only if it holds more values than the reference has in
/// the same window, so genuine multiple eigenvalues are not reported.
GhostReport ghost_detect(const RitzPairs& run, double tol,
                         const std::optional<RitzPairs>& reference = std::nullopt);

// ---------------------------------------------------- noise-scaling study

struct NoiseScalingConfig {
  std::size_t dim = 512;
  std::vector<std::size_t> m_grid{8, 16, 32, 64, 128};
  Vec sigma_grid{1e-10, 1e-8, 1e-6};
  /// sigma used for the m sweep.
  double sigma_for_m = 1e-8;
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  /// Matvec noise norm = scale * sqrt(sigma_f), mirroring the square-root
  /// dependence of the bound on function noise.
  double noise_scale = 1.0;
};

struct NoiseScalingPoint {
  std::size_t m = 0;
  double sigma_f = 0.0;
  double mean_delta = 0.0;  // mean over trials of ||Delta T_m||_2
};

struct NoiseScalingResult {
  std::vector<NoiseScalingPoint> m_sweep;
  std::vector<NoiseScalingPoint> sigma_sweep;
  double slope_m = 0.0;
  double slope_sigma = 0.0;
  double eta_bar = 0.0;  // measured on the exact baseline, reported only
};

/// Spectrum of the test operator used by the noise-scaling study.
Vec noise_study_spectrum(std::size_t dim);

/// Runs full-reorthogonalisation Lanczos with noisy matvecs on a diagonal
/// operator and measures Delta T_m = T_noisy - Q^T H Q, the departure of the
/// computed tridiagonal from the exact projection of H onto the basis the
/// noisy run built. Fits log-log slopes of its mean spectral norm against m
/// (at sigma_for_m) and against sigma_f (at the middle m).
NoiseScalingResult fd_lanczos_noise_scaling(const NoiseScalingConfig& cfg);

}  // namespace curvkit::krylov
