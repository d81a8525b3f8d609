// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "curvkit/fdhvp.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "curvkit/numerics.hpp"

namespace curvkit::fd {

void FdConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("finite-difference step must be positive and finite");
}

namespace {

// Adds sign * w_b g_b(theta) for every batch to the exact accumulator.
void accumulate_pass(const Objective& objective, std::span<const double> theta, double sign,
                     Precision precision, numerics::ExactVectorSum& acc, Vec& scratch,
                     const char* where) {
  const auto weights = objective.batch_weights();
  for (std::size_t b = 0; b < objective.batch_count(); ++b) {
    objective.eval_batch(theta, b, scratch);
    round_in_place(scratch, precision);
    if (!all_finite(scratch)) throw NonFiniteGradient(b, where);
    acc.add(scratch, sign * weights[b]);
  }
}

}  // namespace

Vec hvp_central(const Objective& objective, std::span<double> theta, std::span<const double> v,
                const FdConfig& cfg) {
  cfg.validate();
  const std::size_t n = objective.dim();
  if (theta.size() != n || v.size() != n) throw std::invalid_argument("hvp_central: dimension mismatch");

  double vnorm = 1.0;
  Vec step(v.begin(), v.end());
  if (cfg.normalize_probe) {
    numerics::ExactSum sq;
    for (double x : v) sq.add(x * x);
    vnorm = std::sqrt(sq.value());
    if (vnorm == 0.0) return Vec(n, 0.0);
    for (double& x : step) x /= vnorm;
  }
  for (double& x : step) x *= cfg.epsilon;

  const Vec snapshot(theta.begin(), theta.end());
  // Exact accumulation: the result is independent of batch order, which is
  // what makes every sharded layout reproduce this output bit for bit.
  numerics::ExactVectorSum sum(n);
  Vec scratch(n);
  try {
    for (std::size_t i = 0; i < n; ++i) theta[i] += step[i];
    round_in_place(theta, cfg.precision);
    accumulate_pass(objective, theta, +1.0, cfg.precision, sum, scratch, "forward point");

    for (std::size_t i = 0; i < n; ++i) theta[i] -= 2.0 * step[i];
    round_in_place(theta, cfg.precision);
    accumulate_pass(objective, theta, -1.0, cfg.precision, sum, scratch, "backward point");
  } catch (...) {
    std::copy(snapshot.begin(), snapshot.end(), theta.begin());
    throw;
  }
  // Restore. The third AXPY is not bit-exact in floating point, so the
  // snapshot is the authority.
  std::copy(snapshot.begin(), snapshot.end(), theta.begin());

  const double factor = vnorm / (2.0 * cfg.epsilon * objective.weight_sum());
  Vec acc = sum.value();
  for (double& x : acc) x *= factor;
  return acc;
}

Vec hvp_central(const Objective& objective, std::span<const double> theta,
                std::span<const double> v, const FdConfig& cfg) {
  Vec copy(theta.begin(), theta.end());
  return hvp_central(objective, std::span<double>(copy), v, cfg);
}

StepEstimate optimal_epsilon(const NoiseModel& nm, double machine_eps) {
  if (!(nm.d3_grad_norm > 0.0)) return {std::cbrt(machine_eps), true};
  return {std::cbrt(machine_eps * nm.grad_norm / nm.d3_grad_norm), false};
}

StepEstimate optimal_epsilon_function_noise(const NoiseModel& nm) {
  if (!(nm.d4_norm > 0.0)) return {std::cbrt(machine_epsilon(Precision::fp64)), true};
  return {std::pow(nm.sigma_f / nm.d4_norm, 0.25), false};
}

double second_difference(const Objective& objective, std::span<const double> x,
                         std::span<const double> v, double epsilon,
                         const SecondDifferenceOptions& opts) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("second_difference: step must be positive");
  if (opts.sigma_f > 0.0 && opts.rng == nullptr)
    throw std::invalid_argument("second_difference: noise requested without a generator");
  const std::size_t n = objective.dim();
  Vec point(x.begin(), x.end());
  round_in_place(point, opts.precision);
  auto value_at = [&](double t) {
    Vec p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = x[i] + t * v[i];
    round_in_place(p, opts.precision);
    double f = round_to(objective.loss(p), opts.precision);
    if (opts.sigma_f > 0.0) f += opts.sigma_f * opts.rng->normal();
    if (!std::isfinite(f)) throw std::runtime_error("second_difference: non-finite loss");
    return f;
  };
  const double fp = value_at(epsilon);
  const double f0 = value_at(0.0);
  const double fm = value_at(-epsilon);
  return (fp - 2.0 * f0 + fm) / (epsilon * epsilon);
}

KernelAverage kernel_average_reference(const std::function<double(double)>& field, double epsilon,
                                       std::size_t quad_points) {
  if (quad_points < 64) throw std::invalid_argument("kernel_average_reference: need >= 64 quadrature points");
  if (!(epsilon > 0.0)) throw std::invalid_argument("kernel_average_reference: step must be positive");
  const std::size_t half = quad_points / 2;
  KernelAverage out;
  for (const auto& [lo, hi] : {std::pair{-epsilon, 0.0}, std::pair{0.0, epsilon}}) {
    const auto rule = numerics::gauss_legendre(half, lo, hi);
    for (std::size_t i = 0; i < half; ++i) {
      const double t = rule.nodes[i];
      const double w = rule.weights[i] * (1.0 - std::abs(t) / epsilon);
      out.value += w * field(t);
      out.normalization += w;
      out.first_moment += w * t;
    }
  }
  out.value /= epsilon;
  out.normalization /= epsilon;
  out.first_moment /= epsilon;
  return out;
}

Vec default_epsilon_grid() { return numerics::logspace(1e-8, 1.0, 41); }

std::vector<SweepPoint> fd_error_sweep(const Objective& objective, std::span<const double> theta,
                                       std::span<const double> v, std::span<const double> grid,
                                       const SweepConfig& cfg) {
  std::vector<SweepPoint> out;
  out.reserve(grid.size());
  if (cfg.estimator == Estimator::gradient_hvp) {
    if (cfg.sigma_f > 0.0)
      throw std::invalid_argument("fd_error_sweep: noise injection applies to function values only");
    Vec unit(v.begin(), v.end());
    scale(1.0 / norm2(unit), unit);
    const auto exact = objective.exact_hvp(theta, unit);
    if (!exact) throw std::invalid_argument("fd_error_sweep: oracle has no exact Hessian-vector product");
    const double ref = norm2(*exact);
    for (double eps : grid) {
      FdConfig fc{eps, cfg.precision, true};
      const Vec est = hvp_central(objective, theta, unit, fc);
      double sq = 0.0;
      for (std::size_t i = 0; i < est.size(); ++i) sq += (est[i] - (*exact)[i]) * (est[i] - (*exact)[i]);
      const double err = std::sqrt(sq);
      out.push_back({eps, err, ref > 0.0 ? err / ref : err});
    }
    return out;
  }

  const auto exact = objective.exact_curvature(theta, v);
  if (!exact) throw std::invalid_argument("fd_error_sweep: oracle has no exact directional curvature");
  const double ref = std::abs(*exact);
  const std::size_t trials = cfg.sigma_f > 0.0 ? std::max<std::size_t>(cfg.trials, 1) : 1;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Rng rng(cfg.seed, k);
    SecondDifferenceOptions opts{cfg.precision, cfg.sigma_f, &rng};
    double sq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const double d = second_difference(objective, theta, v, grid[k], opts) - *exact;
      sq += d * d;
    }
    const double err = std::sqrt(sq / static_cast<double>(trials));
    out.push_back({grid[k], err, ref > 0.0 ? err / ref : err});
  }
  return out;
}

SweepSummary summarize_sweep(std::span<const SweepPoint> points,
                             std::optional<double> predicted_epsilon, double fit_factor) {
  SweepSummary s;
  s.predicted_epsilon = predicted_epsilon;
  if (points.empty()) return s;
  Vec eps, err;
  for (const auto& p : points) {
    eps.push_back(p.epsilon);
    err.push_back(p.abs_error);
  }
  s.empirical_minimizer = numerics::refined_log_argmin(eps, err);
  s.min_error = *std::min_element(err.begin(), err.end());

  Vec ax, ay, bx, by;
  for (const auto& p : points) {
    if (!(p.abs_error > 0.0)) continue;
    if (p.epsilon >= fit_factor * s.empirical_minimizer) {
      ax.push_back(p.epsilon);
      ay.push_back(p.abs_error);
    } else if (p.epsilon <= s.empirical_minimizer / fit_factor && p.rel_error < 1.0) {
      bx.push_back(p.epsilon);
      by.push_back(p.abs_error);
    }
  }
  if (ax.size() >= 3) s.slope_above = numerics::fit_loglog(ax, ay).slope;
  if (bx.size() >= 3) s.slope_below = numerics::fit_loglog(bx, by).slope;
  return s;
}

std::string sweep_csv(std::span<const SweepPoint> points, const SweepConfig& cfg) {
  std::ostringstream os;
  os << "epsilon,abs_error,rel_error,mode,sigma_f\n";
  os << std::setprecision(17);
  for (const auto& p : points)
    os << p.epsilon << ',' << p.abs_error << ',' << p.rel_error << ',' << to_string(cfg.precision) << ','
       << cfg.sigma_f << '\n';
  return os.str();
}

}  // namespace curvkit::fd
