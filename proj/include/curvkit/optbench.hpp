// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Optimizer experiments on the rippled surface: GD, heavy-ball momentum and
// Adam under grid-searched learning rates, and Nesterov with per-iteration
// step and momentum from a local curvature estimate,
//   alpha_t = 1 / L_t,  beta_t = (sqrt(L_t) - sqrt(m_t)) / (sqrt(L_t) + sqrt(m_t)).

#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "curvkit/objectives.hpp"
#include "curvkit/vec.hpp"

namespace curvkit::opt {

enum class Method { gd, momentum, adam };

std::string to_string(Method m);
/// "gd", "momentum" or "adam".
Method parse_method(const std::string& s);

struct Trajectory {
  std::vector<Vec> iterates;  // x_0 .. x_T (truncated on divergence)
  Vec losses;                 // f(x_t), all finite
  Vec alphas;                 // adaptive runs only
  Vec betas;
  bool diverged = false;
  std::size_t diverged_at = 0;  // step whose iterate failed

  /// Last recorded loss, or +inf after divergence.
  double final_loss() const;
};

struct OptimizerConfig {
  Method method = Method::gd;
  double lr = 0.01;
  std::size_t steps = 500;
  Vec start{2.0, 2.0};
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double divergence_loss = 1e12;
};

/// Deterministic full-gradient run from cfg.start. Momentum is the heavy-ball
/// form v <- mu v + g, x <- x - lr v; Adam uses bias correction.
Trajectory run_optimizer(const Objective& objective, const OptimizerConfig& cfg);

struct GridResult {
  double best_lr = 0.0;
  Trajectory best;
  Vec lrs;
  Vec final_losses;  // +inf for diverged runs
};

/// Argmin of the final loss over the grid; ties go to the smaller rate.
/// Throws std::invalid_argument on an empty grid.
GridResult grid_search_lr(const Objective& objective, OptimizerConfig base, std::span<const double> lr_grid);

/// 25 log-spaced rates in [1e-4, 1].
Vec default_lr_grid();

// -------------------------------------------------------------- Nesterov

enum class CurvatureMode { pointwise, fd_averaged };

struct Curvature2 {
  double h11 = 0.0, h12 = 0.0, h22 = 0.0;
  double lmax = 0.0, lmin = 0.0;
};

/// Pointwise: the closed-form Hessian at x. Averaged: second differences
/// with step epsilon along e1, e2 and (e1 + e2)/sqrt(2), with the cross term
/// from polarisation h12 = d_diag - (h11 + h22) / 2.
Curvature2 curvature_estimate(const Objective& objective, std::span<const double> x, CurvatureMode mode,
                              double epsilon);

struct NesterovConfig {
  CurvatureMode mode = CurvatureMode::pointwise;
  double epsilon = 1e-3;  // fd_averaged only
  std::size_t steps = 500;
  Vec start{2.0, 2.0};
  /// m is clamped to m_floor_ratio * L when the estimate is not positive.
  double m_floor_ratio = 1e-6;
  double divergence_loss = 1e12;
};

/// y_t = x_t + beta_t (x_t - x_{t-1}),  x_{t+1} = y_t - alpha_t grad f(y_t),
/// with (alpha_t, beta_t) from the curvature estimate at x_t. If the largest
/// eigenvalue is not positive, L = |lambda_min| is used. Requires dim 2.
Trajectory adaptive_nesterov(const Objective& objective, const NesterovConfig& cfg);

/// Global minimum value of the 2D rippled surface: dense grid over the disc
/// that can hold it, then Newton polishing.
double rippled_minimum(const RippledObjective& surface);

std::string trajectory_csv(const Trajectory& t);

}  // namespace curvkit::opt
