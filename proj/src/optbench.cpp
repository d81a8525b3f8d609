// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "curvkit/optbench.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "curvkit/fdhvp.hpp"
#include "curvkit/numerics.hpp"

namespace curvkit::opt {

std::string to_string(Method m) {
  switch (m) {
    case Method::gd: return "gd";
    case Method::momentum: return "momentum";
    case Method::adam: return "adam";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "gd") return Method::gd;
  if (s == "momentum") return Method::momentum;
  if (s == "adam") return Method::adam;
  throw std::invalid_argument("unknown optimizer '" + s + "' (gd, momentum, adam)");
}

double Trajectory::final_loss() const {
  if (diverged || losses.empty()) return std::numeric_limits<double>::infinity();
  return losses.back();
}

namespace {

// Appends x and its loss; false (and the divergence flag) if the loss blew up.
bool record(const Objective& objective, Trajectory& t, const Vec& x, double limit, std::size_t step) {
  const double f = all_finite(x) ? objective.loss(x) : std::numeric_limits<double>::quiet_NaN();
  if (!std::isfinite(f) || f > limit) {
    t.diverged = true;
    t.diverged_at = step;
    return false;
  }
  t.iterates.push_back(x);
  t.losses.push_back(f);
  return true;
}

}  // namespace

Trajectory run_optimizer(const Objective& objective, const OptimizerConfig& cfg) {
  if (cfg.start.size() != objective.dim()) throw std::invalid_argument("run_optimizer: start point has the wrong length");
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("run_optimizer: learning rate must be positive");
  const std::size_t n = objective.dim();
  Trajectory t;
  Vec x = cfg.start;
  if (!record(objective, t, x, cfg.divergence_loss, 0)) return t;
  Vec vel(n, 0.0), m1(n, 0.0), m2(n, 0.0);
  double b1t = 1.0, b2t = 1.0;
  for (std::size_t k = 1; k <= cfg.steps; ++k) {
    const Vec g = objective.gradient(x);
    switch (cfg.method) {
      case Method::gd:
        for (std::size_t i = 0; i < n; ++i) x[i] -= cfg.lr * g[i];
        break;
      case Method::momentum:
        for (std::size_t i = 0; i < n; ++i) {
          vel[i] = cfg.momentum * vel[i] + g[i];
          x[i] -= cfg.lr * vel[i];
        }
        break;
      case Method::adam:
        b1t *= cfg.adam_beta1;
        b2t *= cfg.adam_beta2;
        for (std::size_t i = 0; i < n; ++i) {
          m1[i] = cfg.adam_beta1 * m1[i] + (1.0 - cfg.adam_beta1) * g[i];
          m2[i] = cfg.adam_beta2 * m2[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
          const double mh = m1[i] / (1.0 - b1t);
          const double vh = m2[i] / (1.0 - b2t);
          x[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.adam_eps);
        }
        break;
    }
    if (!record(objective, t, x, cfg.divergence_loss, k)) break;
  }
  return t;
}

Vec default_lr_grid() { return numerics::logspace(1e-4, 1.0, 25); }

GridResult grid_search_lr(const Objective& objective, OptimizerConfig base, std::span<const double> lr_grid) {
  if (lr_grid.empty()) throw std::invalid_argument("grid_search_lr: empty learning-rate grid");
  Vec lrs(lr_grid.begin(), lr_grid.end());
  std::sort(lrs.begin(), lrs.end());
  GridResult res;
  res.lrs = lrs;
  bool have = false;
  for (double lr : lrs) {
    base.lr = lr;
    Trajectory t = run_optimizer(objective, base);
    const double f = t.final_loss();
    res.final_losses.push_back(f);
    // Strict comparison over ascending rates keeps the smaller rate on ties.
    if (!have || f < res.best.final_loss()) {
      res.best_lr = lr;
      res.best = std::move(t);
      have = true;
    }
  }
  return res;
}

// -------------------------------------------------------------- Nesterov

namespace {

void eig2(Curvature2& c) {
  const double mid = 0.5 * (c.h11 + c.h22);
  const double rad = std::hypot(0.5 * (c.h11 - c.h22), c.h12);
  c.lmax = mid + rad;
  c.lmin = mid - rad;
}

}  // namespace

Curvature2 curvature_estimate(const Objective& objective, std::span<const double> x, CurvatureMode mode,
                              double epsilon) {
  if (objective.dim() != 2 || x.size() != 2) throw std::invalid_argument("curvature_estimate: needs a 2D objective");
  Curvature2 c;
  if (mode == CurvatureMode::pointwise) {
    const auto h = objective.exact_hessian(x);
    if (!h) throw std::invalid_argument("curvature_estimate: pointwise mode needs a closed-form Hessian");
    c.h11 = (*h)(0, 0);
    c.h12 = 0.5 * ((*h)(0, 1) + (*h)(1, 0));
    c.h22 = (*h)(1, 1);
  } else {
    const double e1[2] = {1.0, 0.0}, e2[2] = {0.0, 1.0};
    const double d[2] = {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
    c.h11 = fd::second_difference(objective, x, e1, epsilon);
    c.h22 = fd::second_difference(objective, x, e2, epsilon);
    const double dd = fd::second_difference(objective, x, d, epsilon);
    c.h12 = dd - 0.5 * (c.h11 + c.h22);
  }
  eig2(c);
  return c;
}

Trajectory adaptive_nesterov(const Objective& objective, const NesterovConfig& cfg) {
  if (objective.dim() != 2 || cfg.start.size() != 2) throw std::invalid_argument("adaptive_nesterov: needs a 2D objective");
  if (cfg.mode == CurvatureMode::fd_averaged && !(cfg.epsilon > 0.0))
    throw std::invalid_argument("adaptive_nesterov: averaging step must be positive");
  Trajectory t;
  Vec x = cfg.start, x_prev = cfg.start;
  if (!record(objective, t, x, cfg.divergence_loss, 0)) return t;
  for (std::size_t k = 1; k <= cfg.steps; ++k) {
    const Curvature2 c = curvature_estimate(objective, x, cfg.mode, cfg.epsilon);
    double big = c.lmax > 0.0 ? c.lmax : std::abs(c.lmin);
    if (!(big > 0.0)) big = 1.0;  // zero curvature estimate: unit step
    double small = c.lmin;
    if (!(small > 0.0)) small = cfg.m_floor_ratio * big;
    small = std::min(small, big);
    const double alpha = 1.0 / big;
    const double beta = (std::sqrt(big) - std::sqrt(small)) / (std::sqrt(big) + std::sqrt(small));
    t.alphas.push_back(alpha);
    t.betas.push_back(beta);

    Vec y(2);
    for (int i = 0; i < 2; ++i) y[i] = x[i] + beta * (x[i] - x_prev[i]);
    const Vec g = objective.gradient(y);
    x_prev = x;
    for (int i = 0; i < 2; ++i) x[i] = y[i] - alpha * g[i];
    if (!record(objective, t, x, cfg.divergence_loss, k)) break;
  }
  return t;
}

double rippled_minimum(const RippledObjective& surface) {
  const auto& s = surface.spec();
  if (s.dims != 2) throw std::invalid_argument("rippled_minimum: needs the 2D surface");
  // f >= r^2/2 - |B|, and f(0) = 0, so the minimiser lies in r <= sqrt(2|B|).
  const double radius = std::sqrt(2.0 * std::abs(s.amplitude)) + 1e-12;
  const double h = std::min(radius, 0.1 / std::max(1.0, std::abs(s.frequency)));
  const auto steps = static_cast<long>(std::ceil(radius / h));
  double best = surface.loss(Vec{0.0, 0.0});
  Vec arg{0.0, 0.0};
  for (long i = -steps; i <= steps; ++i) {
    for (long j = -steps; j <= steps; ++j) {
      const Vec p{h * static_cast<double>(i), h * static_cast<double>(j)};
      const double f = surface.loss(p);
      if (f < best) {
        best = f;
        arg = p;
      }
    }
  }
  for (int it = 0; it < 50; ++it) {
    const Vec g = surface.gradient(arg);
    const DenseMatrix hm = *surface.exact_hessian(arg);
    const double det = hm(0, 0) * hm(1, 1) - hm(0, 1) * hm(1, 0);
    if (!(det > 0.0) || !(hm(0, 0) > 0.0)) break;
    const double dx = (hm(1, 1) * g[0] - hm(0, 1) * g[1]) / det;
    const double dy = (hm(0, 0) * g[1] - hm(1, 0) * g[0]) / det;
    const Vec next{arg[0] - dx, arg[1] - dy};
    const double f = surface.loss(next);
    if (f > best) break;
    best = f;
    arg = next;
    if (std::hypot(dx, dy) < 1e-15) break;
  }
  return best;
}

std::string trajectory_csv(const Trajectory& t) {
  std::ostringstream os;
  os << std::setprecision(17) << "t,x,y,loss,alpha_t,beta_t\n";
  for (std::size_t k = 0; k < t.iterates.size(); ++k) {
    const Vec& x = t.iterates[k];
    os << k << ',' << x[0] << ',' << (x.size() > 1 ? x[1] : 0.0) << ',' << t.losses[k] << ',';
    // Step k's coefficients produced iterate k; the start has none.
    if (k >= 1 && k - 1 < t.alphas.size()) os << t.alphas[k - 1] << ',' << t.betas[k - 1];
    else os << ',';
    os << '\n';
  }
  return os.str();
}

}  // namespace curvkit::opt
