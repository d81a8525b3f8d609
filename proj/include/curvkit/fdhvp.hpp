// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference curvature estimators.
//
//   hvp_central        (g(theta + eps v) - g(theta - eps v)) / (2 eps)
//   second_difference  (f(x + eps v) - 2 f(x) + f(x - eps v)) / eps^2
//
// The second difference equals the triangular-kernel average
//   (1/eps) int_{-eps}^{eps} (1 - |t|/eps) v^T H(x + t v) v dt,
// which kernel_average_reference() evaluates by quadrature as an independent
// check.
//
// Low precision is emulated: each fp64 result (perturbed parameters,
// gradients, function values) is rounded to the declared storage format.

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curvkit/objectives.hpp"
#include "curvkit/precision.hpp"
#include "curvkit/rng.hpp"
#include "curvkit/vec.hpp"

namespace curvkit::fd {

struct FdConfig {
  double epsilon = 1e-4;
  Precision precision = Precision::fp64;
  /// Normalise the probe before perturbing and scale the result back by
  /// ||v||. Krylov callers that already hold unit vectors turn this off.
  bool normalize_probe = true;

  double machine_eps() const { return machine_epsilon(precision); }
  void validate() const;
};

/// Quantities entering the step-size and error laws. All nonnegative.
struct NoiseModel {
  double sigma_f = 0.0;       // std of additive function-value noise
  double d4_norm = 0.0;       // |D^4 f| along the probe
  double d3_grad_norm = 0.0;  // ||grad(D_v^3 L)||
  double grad_norm = 0.0;     // ||grad L||
  double eta_bar = 0.0;       // (E ||q||_inf^2)^-1, reported only
};

/// Gradient central-difference HVP. `theta` is perturbed in place
/// (theta += eps u, theta -= 2 eps u) and restored bit-exactly from a
/// snapshot before returning, including on error. Gradients of each batch
/// are accumulated with weight w_b (+ for the forward point, - for the
/// backward point) in an exact accumulator, rounded once, and divided by
/// 2 eps sum_b w_b.
///
/// Throws NonFiniteGradient naming the batch if a gradient is not finite.
Vec hvp_central(const Objective& objective, std::span<double> theta, std::span<const double> v,
                const FdConfig& cfg);
Vec hvp_central(const Objective& objective, std::span<const double> theta,
                std::span<const double> v, const FdConfig& cfg);

struct StepEstimate {
  double epsilon = 0.0;
  bool fallback = false;  // d3_grad_norm was zero; epsilon = machine_eps^(1/3)
};

/// Cube-root balance of the truncation and roundoff terms of the gradient
/// estimator: (eps_mach ||grad L|| / ||grad(D_v^3 L)||)^(1/3).
StepEstimate optimal_epsilon(const NoiseModel& nm, double machine_eps);

/// Quarter-power balance for the function-value estimator:
/// (sigma_f / |D^4 f|)^(1/4). Falls back like optimal_epsilon when d4 is 0.
StepEstimate optimal_epsilon_function_noise(const NoiseModel& nm);

/// Options for the function-value estimator.
struct SecondDifferenceOptions {
  Precision precision = Precision::fp64;
  double sigma_f = 0.0;  // additive N(0, sigma_f^2) per function evaluation
  Rng* rng = nullptr;    // required when sigma_f > 0
};

/// Directional second difference along v (not normalised: for non-unit v
/// the result approximates v^T H v).
double second_difference(const Objective& objective, std::span<const double> x,
                         std::span<const double> v, double epsilon,
                         const SecondDifferenceOptions& opts = {});

struct KernelAverage {
  double value = 0.0;          // (1/eps) int w(t) field(t) dt
  double normalization = 0.0;  // (1/eps) int w(t) dt, should be 1
  double first_moment = 0.0;   // (1/eps) int t w(t) dt, should be 0
};

/// Triangular-kernel average of a curvature field t -> v^T H(x + t v) v,
/// by Gauss-Legendre on [-eps, 0] and [0, eps] (quad_points split evenly,
/// at least 64 in total).
KernelAverage kernel_average_reference(const std::function<double(double)>& field, double epsilon,
                                       std::size_t quad_points = 128);

// --------------------------------------------------------------- sweeps

enum class Estimator { gradient_hvp, second_difference };

struct SweepConfig {
  Estimator estimator = Estimator::gradient_hvp;
  Precision precision = Precision::fp64;
  double sigma_f = 0.0;    // second_difference only
  std::size_t trials = 1;  // RMS over this many noise draws when sigma_f > 0
  std::uint64_t seed = 0;
};

struct SweepPoint {
  double epsilon = 0.0;
  double abs_error = 0.0;
  double rel_error = 0.0;
};

/// 41 log-spaced points in [1e-8, 1].
Vec default_epsilon_grid();

/// Error of the chosen estimator against the oracle's exact curvature at
/// every grid point; result ordered by epsilon.
std::vector<SweepPoint> fd_error_sweep(const Objective& objective, std::span<const double> theta,
                                       std::span<const double> v, std::span<const double> grid,
                                       const SweepConfig& cfg);

struct SweepSummary {
  double empirical_minimizer = 0.0;
  double min_error = 0.0;
  std::optional<double> slope_above;  // fitted over eps >= fit_factor * minimizer
  std::optional<double> slope_below;  // fitted over eps <= minimizer / fit_factor
  std::optional<double> predicted_epsilon;
};

/// Fits log-log slopes on either side of the empirical minimum. Points with
/// rel_error >= 1 (estimate lost all significance) are excluded from the
/// small-eps fit. `fit_factor` keeps the fits away from the crossover.
SweepSummary summarize_sweep(std::span<const SweepPoint> points,
                             std::optional<double> predicted_epsilon = std::nullopt,
                             double fit_factor = 10.0);

std::string sweep_csv(std::span<const SweepPoint> points, const SweepConfig& cfg);

}  // namespace curvkit::fd
