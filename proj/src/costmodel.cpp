// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "curvkit/costmodel.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace curvkit::cost {

namespace {

void require_nonnegative(double x, const char* name) {
  if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument(std::string("cost model: ") + name + " must be finite and >= 0");
}

}  // namespace

void CostParams::validate() const {
  const std::pair<double, const char*> fields[] = {
      {alpha, "alpha"}, {beta, "beta"},   {gamma, "gamma"},       {f_fwd, "f_fwd"}, {f_bwd, "f_bwd"},
      {g_grad, "g_grad"}, {v_grad, "v_grad"}, {p, "p"},           {r, "r"},         {t_scalar, "t_scalar"},
      {c0, "c0"},       {c1, "c1"},       {k_vec, "k_vec"}};
  for (const auto& [v, name] : fields) require_nonnegative(v, name);
  if (p > 0.0 && r < 1.0) throw std::invalid_argument("cost model: need at least one rank");
}

double t_grad(const CostParams& p) {
  return p.f_fwd * p.gamma + p.f_bwd * p.gamma + p.alpha * p.g_grad + p.beta * p.v_grad;
}

double t_vec(const CostParams& p) { return p.k_vec * p.p_loc() * p.gamma + p.t_scalar; }

double t_hvp(const CostParams& p) { return 2.0 * t_grad(p) + t_vec(p); }

double t_lanczos_iter(const CostParams& p, std::size_t window) {
  const double r = static_cast<double>(window);
  return t_hvp(p) + (2.0 + r) * p.t_scalar + (p.c0 + p.c1 * r) * p.p_loc() * p.gamma;
}

SlqCost t_slq(const CostParams& p, std::size_t probes, std::size_t m, std::size_t window, double t_post) {
  require_nonnegative(t_post, "t_post");
  SlqCost c;
  c.iterations = static_cast<double>(probes) * static_cast<double>(m) * t_lanczos_iter(p, window);
  c.post = t_post;
  c.total = c.iterations + c.post;
  c.post_fraction = c.total > 0.0 ? c.post / c.total : 0.0;
  return c;
}

DpFsdp dp_vs_fsdp(double c, double k, double p, double l, double alpha, double beta) {
  for (const auto& [v, name] : {std::pair{c, "C"}, {p, "P"}, {alpha, "alpha"}, {beta, "beta"}})
    require_nonnegative(v, name);
  if (!(k >= 1.0) || !(l >= 1.0)) throw std::invalid_argument("cost model: K and L must be >= 1");
  DpFsdp out;
  out.t_dp = c / k + alpha * (k - 1.0) + 2.0 * beta * p;
  out.t_fsdp = c / k + 4.0 * alpha * (k - 1.0) * l + 8.0 * beta * p;
  out.delta = 4.0 * alpha * (k - 1.0) * (l - 1.0) + 6.0 * beta * p;
  // Communication terms only; avoids cancellation when C/K dominates.
  out.difference = alpha * (k - 1.0) * (4.0 * l - 1.0) + 6.0 * beta * p;
  out.relative_overhead = out.t_dp > 0.0 ? out.difference / out.t_dp : 0.0;
  return out;
}

DpFsdp dp_vs_fsdp_from_times(double t_comp, double t_dp_comm, double t_fsdp_comm) {
  for (const auto& [v, name] : {std::pair{t_comp, "t_comp"}, {t_dp_comm, "t_dp_comm"}, {t_fsdp_comm, "t_fsdp_comm"}})
    require_nonnegative(v, name);
  DpFsdp out;
  out.t_dp = t_comp + t_dp_comm;
  out.t_fsdp = t_comp + t_fsdp_comm;
  out.delta = t_fsdp_comm - t_dp_comm;
  out.difference = out.delta;
  out.relative_overhead = out.t_dp > 0.0 ? out.difference / out.t_dp : 0.0;
  return out;
}

std::optional<Calibration> calibrate_to_comm_times(double dp_comm, double fsdp_comm, double k, double l,
                                                   double p) {
  if (!(k > 1.0) || !(l >= 1.0) || !(p > 0.0)) return std::nullopt;
  // With a = alpha (K-1), b = beta P:  a + 2b = dp,  4 L a + 8 b = fsdp.
  const double det = 8.0 - 8.0 * l;
  if (det == 0.0) {
    // L = 1: the system is consistent only when fsdp = 4 dp; take alpha = 0.
    if (std::abs(fsdp_comm - 4.0 * dp_comm) > 1e-12 * std::max(1.0, fsdp_comm)) return std::nullopt;
    return Calibration{0.0, dp_comm / (2.0 * p)};
  }
  const double a = (8.0 * dp_comm - 2.0 * fsdp_comm) / det;
  const double b = (dp_comm - a) / 2.0;
  if (a < 0.0 || b < 0.0) return std::nullopt;
  return Calibration{a / (k - 1.0), b / p};
}

double t_grad_strong(const ScalingWorkload& w, double alpha, double beta, double gamma, double ranks) {
  if (!(ranks >= 1.0)) throw std::invalid_argument("cost model: need at least one rank");
  const double compute = w.flops * gamma / ranks;
  if (ranks == 1.0) return compute;
  return compute + alpha * w.g_grad + beta * 3.0 * w.param_bytes * (ranks - 1.0) / ranks;
}

double strong_scaling_speedup(const ScalingWorkload& w, double alpha, double beta, double gamma, double ranks) {
  const double tk = t_grad_strong(w, alpha, beta, gamma, ranks);
  return tk > 0.0 ? t_grad_strong(w, alpha, beta, gamma, 1.0) / tk : 1.0;
}

FittedCoefficients fit_cost_coefficients(std::span<const TimingSample> samples) {
  if (samples.size() < 3) throw std::invalid_argument("fit_cost_coefficients: need at least three samples");
  // Normal equations (X^T X) c = X^T y with columns (flops, collectives, bytes).
  std::array<std::array<double, 4>, 3> m{};
  for (const auto& s : samples) {
    const double x[3] = {s.flops, s.collectives, s.bytes};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m[i][j] += x[i] * x[j];
      m[i][3] += x[i] * s.seconds;
    }
  }
  // Column scaling keeps the elimination well conditioned when flops and
  // bytes differ by many orders of magnitude.
  std::array<double, 3> sc{};
  for (int i = 0; i < 3; ++i) sc[i] = m[i][i] > 0.0 ? 1.0 / std::sqrt(m[i][i]) : 1.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m[i][j] *= sc[i] * sc[j];
    m[i][3] *= sc[i];
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (std::abs(m[piv][col]) < 1e-12) throw std::invalid_argument("fit_cost_coefficients: samples are degenerate");
    std::swap(m[piv], m[col]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int j = col; j < 4; ++j) m[r][j] -= f * m[col][j];
    }
  }
  FittedCoefficients out;
  out.gamma = m[0][3] / m[0][0] * sc[0];
  out.alpha = m[1][3] / m[1][1] * sc[1];
  out.beta = m[2][3] / m[2][2] * sc[2];
  double ss = 0.0;
  for (const auto& s : samples) {
    const double r = s.seconds - (out.gamma * s.flops + out.alpha * s.collectives + out.beta * s.bytes);
    ss += r * r;
  }
  out.rms_residual = std::sqrt(ss / static_cast<double>(samples.size()));
  return out;
}

}  // namespace curvkit::cost
