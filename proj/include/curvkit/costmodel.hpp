// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// (alpha, beta, gamma) cost calculators for sharded gradients, HVPs, Lanczos
// iterations and SLQ, plus the data-parallel vs fully-sharded comparison.
// All times are in seconds. These are predictive formulas, not measurements.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace curvkit::cost {

struct CostParams {
  double alpha = 0.0;     // latency per collective (s)
  double beta = 0.0;      // bandwidth cost (s / byte)
  double gamma = 0.0;     // compute cost per flop or per vector element (s)
  double f_fwd = 0.0;     // forward FLOPs per rank
  double f_bwd = 0.0;     // backward FLOPs per rank
  double g_grad = 0.0;    // collectives per gradient pass
  double v_grad = 0.0;    // payload bytes per rank per gradient pass
  double p = 0.0;         // parameter count
  double r = 1.0;         // rank count R
  double t_scalar = 0.0;  // scalar all-reduce time
  double c0 = 0.0;        // per-iteration vector ops
  double c1 = 0.0;        // vector ops per reorthogonalisation vector
  /// Shard-local vector passes per HVP: three AXPYs, one copy and one
  /// scaling. Not fixed by the algorithm description; overridable.
  double k_vec = 5.0;

  double p_loc() const { return r > 0.0 ? p / r : 0.0; }
  /// Throws std::invalid_argument on a negative or non-finite field, or R < 1
  /// with P > 0.
  void validate() const;
};

/// (F_fwd + F_bwd) gamma + alpha G_grad + beta V_grad
double t_grad(const CostParams& p);
/// k_vec P_loc gamma + T_scalar
double t_vec(const CostParams& p);
/// 2 t_grad + t_vec
double t_hvp(const CostParams& p);
/// t_hvp + (2 + r) T_scalar + (c0 + c1 r) P_loc gamma
double t_lanczos_iter(const CostParams& p, std::size_t window);

struct SlqCost {
  double total = 0.0;
  double iterations = 0.0;     // s m t_lanczos_iter
  double post = 0.0;
  double post_fraction = 0.0;  // post / total, 0 when total is 0
};

SlqCost t_slq(const CostParams& p, std::size_t probes, std::size_t m, std::size_t window, double t_post);

struct DpFsdp {
  double t_dp = 0.0;
  double t_fsdp = 0.0;
  /// Closed-form overhead 4 alpha (K-1)(L-1) + 6 beta P as usually quoted.
  /// It drops 3 alpha (K-1) from the true difference; both are reported.
  double delta = 0.0;
  double difference = 0.0;         // t_fsdp - t_dp = alpha (K-1)(4L-1) + 6 beta P
  double relative_overhead = 0.0;  // difference / t_dp, 0 when t_dp is 0
};

/// T_DP   = C/K + alpha (K-1) + 2 beta P
/// T_FSDP = C/K + 4 alpha (K-1) L + 8 beta P
/// P in bytes. Throws std::invalid_argument for K < 1, L < 1 or negative
/// inputs.
DpFsdp dp_vs_fsdp(double c, double k, double p, double l, double alpha, double beta);

/// The same comparison from per-step compute time and the two measured
/// communication times, the form in which worked examples are usually
/// quoted.
DpFsdp dp_vs_fsdp_from_times(double t_comp, double t_dp_comm, double t_fsdp_comm);

struct Calibration {
  double alpha = 0.0;
  double beta = 0.0;
};

/// Solves alpha (K-1) + 2 beta P = dp_comm and 4 alpha (K-1) L + 8 beta P =
/// fsdp_comm. Returns nullopt when no nonnegative (alpha, beta) exists; the
/// formulas force fsdp_comm >= 4 dp_comm.
std::optional<Calibration> calibrate_to_comm_times(double dp_comm, double fsdp_comm, double k, double l,
                                                   double p);

// ------------------------------------------------------------ scaling

struct ScalingWorkload {
  double flops = 0.0;        // forward + backward FLOPs of the whole batch
  double g_grad = 0.0;       // collectives per gradient pass when sharded
  double param_bytes = 0.0;  // bytes of the full parameter vector
};

/// Gradient time on R ranks: compute splits as flops / R; with R > 1 each
/// pass pays alpha G_grad plus beta * 3 * param_bytes * (R-1)/R (parameter
/// all-gathers in both passes and one gradient reduce-scatter).
double t_grad_strong(const ScalingWorkload& w, double alpha, double beta, double gamma, double ranks);

/// t_grad_strong(1) / t_grad_strong(ranks).
double strong_scaling_speedup(const ScalingWorkload& w, double alpha, double beta, double gamma, double ranks);

// ---------------------------------------------------------------- fitting

struct TimingSample {
  double flops = 0.0;
  double collectives = 0.0;
  double bytes = 0.0;
  double seconds = 0.0;
};

struct FittedCoefficients {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double rms_residual = 0.0;
};

/// Least squares seconds ~ gamma flops + alpha collectives + beta bytes, by
/// the normal equations. Needs at least three samples with linearly
/// independent (flops, collectives, bytes); throws otherwise.
FittedCoefficients fit_cost_coefficients(std::span<const TimingSample> samples);

}  // namespace curvkit::cost
