// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "curvkit/lanczos.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "curvkit/numerics.hpp"

namespace curvkit::krylov {

// --------------------------------------------------------------- operators

void DiagonalOperator::apply(std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < d_.size(); ++i) out[i] = d_[i] * in[i];
}

ExactHvpOperator::ExactHvpOperator(const Objective& objective, Vec theta)
    : objective_(objective), theta_(std::move(theta)) {
  if (theta_.size() != objective.dim()) throw std::invalid_argument("ExactHvpOperator: dimension mismatch");
}

void ExactHvpOperator::apply(std::span<const double> in, std::span<double> out) {
  const auto hv = objective_.exact_hvp(theta_, in);
  if (!hv) throw std::invalid_argument("ExactHvpOperator: objective has no closed-form Hessian");
  std::copy(hv->begin(), hv->end(), out.begin());
}

FdHvpOperator::FdHvpOperator(const Objective& objective, Vec theta, fd::FdConfig cfg)
    : objective_(objective), theta_(std::move(theta)), cfg_(cfg) {
  if (theta_.size() != objective.dim()) throw std::invalid_argument("FdHvpOperator: dimension mismatch");
  cfg_.validate();
}

void FdHvpOperator::apply(std::span<const double> in, std::span<double> out) {
  const Vec hv = fd::hvp_central(objective_, std::span<double>(theta_), in, cfg_);
  std::copy(hv.begin(), hv.end(), out.begin());
}

NoisyOperator::NoisyOperator(LinearOperator& base, double noise_norm, std::uint64_t seed,
                             std::uint64_t stream)
    : base_(base), noise_norm_(noise_norm), rng_(seed, stream) {
  if (!(noise_norm >= 0.0)) throw std::invalid_argument("NoisyOperator: noise must be nonnegative");
}

void NoisyOperator::apply(std::span<const double> in, std::span<double> out) {
  base_.apply(in, out);
  if (noise_norm_ == 0.0) return;
  const double sd = noise_norm_ / std::sqrt(static_cast<double>(out.size()));
  for (double& x : out) x += sd * rng_.normal();
}

// ------------------------------------------------------------------ config

std::size_t ReorthPolicy::width(std::size_t stored) const {
  switch (kind) {
    case Kind::none: return 0;
    case Kind::window: return std::min(window, stored);
    case Kind::full: return stored;
  }
  return 0;
}

std::string ReorthPolicy::to_string() const {
  switch (kind) {
    case Kind::none: return "none";
    case Kind::window: return "window:" + std::to_string(window);
    case Kind::full: return "full";
  }
  return "?";
}

ReorthPolicy ReorthPolicy::parse(const std::string& text) {
  if (text == "none") return none();
  if (text == "full") return full();
  const std::string prefix = "window:";
  if (text.rfind(prefix, 0) == 0) {
    const std::string digits = text.substr(prefix.size());
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit))
      return windowed(std::stoul(digits));
  }
  throw std::invalid_argument("reorthogonalisation must be none, full or window:<r>, got '" + text + "'");
}

// ----------------------------------------------------------------- lanczos

LanczosResult lanczos(LinearOperator& op, std::span<const double> start, const LanczosConfig& cfg) {
  const std::size_t n = op.dim();
  if (cfg.m == 0 || cfg.m > n) throw std::invalid_argument("lanczos: need 1 <= m <= dim");
  if (start.size() != n) throw std::invalid_argument("lanczos: start vector has the wrong length");
  if (cfg.no_basis_storage && cfg.reorth.kind != ReorthPolicy::Kind::none)
    throw std::invalid_argument("lanczos: reorthogonalisation needs the stored basis");

  LanczosResult out;
  out.storage = cfg.storage;

  const double start_norm = std::sqrt(op.dot(start, start));
  if (!(start_norm > 0.0) || !std::isfinite(start_norm)) throw std::invalid_argument("lanczos: zero start vector");

  Vec q(start.begin(), start.end());
  for (double& x : q) x /= start_norm;
  round_in_place(q, cfg.storage);

  std::vector<Vec> window;  // basis used for reorthogonalisation
  Vec q_prev(n, 0.0);
  Vec w(n);
  double beta_prev = 0.0;
  double t_norm = 0.0;

  auto store = [&](const Vec& v) {
    out.basis_norms.push_back(norm2(v));
    if (!cfg.no_basis_storage) out.basis.push_back(v);
  };
  store(q);

  for (std::size_t k = 0; k < cfg.m; ++k) {
    if (cfg.on_iteration) cfg.on_iteration(k);
    op.apply(q, w);
    const double alpha = op.dot(w, q);
    out.t.alpha.push_back(alpha);
    out.steps = k + 1;
    t_norm = std::max(t_norm, std::abs(alpha) + beta_prev);
    if (k + 1 == cfg.m) break;

    for (std::size_t i = 0; i < n; ++i) w[i] -= alpha * q[i] + beta_prev * q_prev[i];

    const std::size_t r = cfg.reorth.width(out.basis.size());
    for (int pass = 0; pass < (cfg.two_pass ? 2 : 1) && r > 0; ++pass) {
      // Classical Gram-Schmidt: all coefficients from the same w.
      Vec coeff(r);
      for (std::size_t j = 0; j < r; ++j) coeff[j] = op.dot(w, out.basis[out.basis.size() - r + j]);
      for (std::size_t j = 0; j < r; ++j) axpy(-coeff[j], out.basis[out.basis.size() - r + j], w);
    }

    const double beta = std::sqrt(op.dot(w, w));
    out.residual = beta;
    t_norm = std::max(t_norm, std::abs(alpha) + beta_prev + beta);
    if (!(beta > cfg.breakdown_tol * t_norm)) {
      out.breakdown = true;
      break;
    }
    out.t.beta.push_back(beta);
    q_prev = q;
    for (std::size_t i = 0; i < n; ++i) q[i] = w[i] / beta;
    round_in_place(q, cfg.storage);
    store(q);
    beta_prev = beta;
  }
  if (cfg.on_iteration) cfg.on_iteration(out.steps);
  // A breakdown-free run stores one vector past T; drop it so the basis
  // matches the tridiagonal.
  if (out.basis.size() > out.steps) out.basis.resize(out.steps);
  if (out.basis_norms.size() > out.steps) out.basis_norms.resize(out.steps);
  return out;
}

// -------------------------------------------------------------------- ritz

RitzPairs ritz(const Tridiagonal& t) {
  const std::size_t n = t.size();
  if (n == 0) return {};
  if (t.beta.size() + 1 != n) throw std::invalid_argument("ritz: beta must have m - 1 entries");
  Vec d = t.alpha;
  Vec e(n, 0.0);
  std::copy(t.beta.begin(), t.beta.end(), e.begin());
  Vec z(n, 0.0);
  z[0] = 1.0;

  // Implicit QL with Wilkinson shifts; rotations are applied to the first
  // row of the eigenvector matrix only.
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) + dd == dd) break;
      }
      if (m != l) {
        if (++iter > 200) throw std::runtime_error("ritz: QL iteration did not converge");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        for (std::size_t i = m; i-- > l;) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          f = z[i + 1];
          z[i + 1] = s * z[i] + c * f;
          z[i] = c * z[i] - s * f;
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  RitzPairs out;
  for (std::size_t i : order) {
    out.values.push_back(d[i]);
    out.weights.push_back(z[i] * z[i]);
  }
  return out;
}

double tridiagonal_distance(const Tridiagonal& a, const Tridiagonal& b) {
  if (a.size() != b.size() || a.beta.size() != b.beta.size())
    throw std::invalid_argument("tridiagonal_distance: size mismatch");
  Tridiagonal diff;
  for (std::size_t i = 0; i < a.size(); ++i) diff.alpha.push_back(a.alpha[i] - b.alpha[i]);
  for (std::size_t i = 0; i < a.beta.size(); ++i) diff.beta.push_back(a.beta[i] - b.beta[i]);
  const auto ev = ritz(diff).values;
  if (ev.empty()) return 0.0;
  return std::max(std::abs(ev.front()), std::abs(ev.back()));
}

double eta_bar(const LanczosResult& result) {
  if (result.basis.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& q : result.basis) {
    const double m = norm_inf(q);
    acc += m * m;
  }
  return static_cast<double>(result.basis.size()) / acc;
}

// --------------------------------------------------------------------- SLQ

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

double SpectralDensity::trace_estimate() const {
  double s = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * nodes[i];
  return static_cast<double>(dim) * s;
}

double SpectralDensity::evaluate(double lambda) const {
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  double s = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double z = (lambda - nodes[i]) / sigma;
    s += weights[i] * std::exp(-0.5 * z * z);
  }
  return norm * s;
}

double SpectralDensity::mass(double lo, double hi) const {
  double s = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    s += weights[i] * (normal_cdf((hi - nodes[i]) / sigma) - normal_cdf((lo - nodes[i]) / sigma));
  return s;
}

std::pair<double, double> SpectralDensity::support() const {
  if (nodes.empty()) return {0.0, 0.0};
  const auto [lo, hi] = std::minmax_element(nodes.begin(), nodes.end());
  return {*lo - 5.0 * sigma, *hi + 5.0 * sigma};
}

SpectralDensity slq_density(LinearOperator& op, const SlqConfig& cfg) {
  if (cfg.probes == 0) throw std::invalid_argument("slq_density: need at least one probe");
  if (cfg.smoothing_sigma && !(*cfg.smoothing_sigma > 0.0))
    throw std::invalid_argument("slq_density: smoothing bandwidth must be positive");
  SpectralDensity out;
  out.probes = cfg.probes;
  out.dim = op.dim();
  const double inv_s = 1.0 / static_cast<double>(cfg.probes);
  Vec probe(op.dim());
  for (std::size_t j = 0; j < cfg.probes; ++j) {
    Rng rng(cfg.seed, j);
    if (cfg.distribution == ProbeDistribution::gaussian) rng.fill_normal(probe);
    else
      for (double& x : probe) x = rng.sign();
    const auto run = lanczos(op, probe, cfg.lanczos);
    ProbeRun pr{ritz(run.t), run.breakdown, run.steps, eta_bar(run)};
    for (std::size_t i = 0; i < pr.ritz.values.size(); ++i) {
      out.nodes.push_back(pr.ritz.values[i]);
      out.weights.push_back(pr.ritz.weights[i] * inv_s);
    }
    out.breakdown = out.breakdown || run.breakdown;
    out.runs.push_back(std::move(pr));
  }
  if (cfg.smoothing_sigma) {
    out.sigma = *cfg.smoothing_sigma;
  } else {
    const auto [lo, hi] = std::minmax_element(out.nodes.begin(), out.nodes.end());
    const double width = *hi - *lo;
    // A single spike has no width; fall back to its magnitude.
    out.sigma = width > 0.0 ? 0.01 * width : 0.01 * std::max(1.0, std::max(std::abs(*lo), std::abs(*hi)));
  }
  return out;
}

double total_variation(const SpectralDensity& p, const SpectralDensity& q, std::size_t points) {
  if (points < 2) throw std::invalid_argument("total_variation: need at least two grid points");
  const auto [plo, phi] = p.support();
  const auto [qlo, qhi] = q.support();
  const double lo = std::min(plo, qlo), hi = std::max(phi, qhi);
  const double h = (hi - lo) / static_cast<double>(points - 1);
  double s = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = lo + h * static_cast<double>(i);
    const double f = std::abs(p.evaluate(x) - q.evaluate(x));
    s += (i == 0 || i + 1 == points) ? 0.5 * f : f;
  }
  return 0.5 * s * h;
}

std::string stem_csv(const SpectralDensity& d) {
  std::ostringstream os;
  os << std::setprecision(17) << "lambda,gamma\n";
  for (std::size_t i = 0; i < d.nodes.size(); ++i) os << d.nodes[i] << ',' << d.weights[i] << '\n';
  return os.str();
}

std::string density_csv(const SpectralDensity& d, std::size_t points) {
  std::ostringstream os;
  os << std::setprecision(17) << "lambda,density\n";
  const auto [lo, hi] = d.support();
  for (std::size_t i = 0; i < points; ++i) {
    const double x = points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    os << x << ',' << d.evaluate(x) << '\n';
  }
  return os.str();
}

// ------------------------------------------------------------------ ghosts

double default_ghost_tol(std::span<const double> values, Precision storage) {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return std::max(1e-6, 2.0 * machine_epsilon(storage)) * m;
}

GhostReport ghost_detect(const RitzPairs& run, double tol, const std::optional<RitzPairs>& reference) {
  GhostReport report;
  report.tol = tol;
  const std::size_t n = run.values.size();
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && run.values[j] - run.values[j - 1] < tol) ++j;
    if (j - i >= 2) {
      GhostCluster c;
      for (std::size_t k = i; k < j; ++k) {
        c.values.push_back(run.values[k]);
        c.weights.push_back(run.weights[k]);
        c.weight_sum += run.weights[k];
        c.center += run.values[k];
      }
      c.center /= static_cast<double>(c.values.size());
      c.splitting = c.values.back() - c.values.front();
      bool keep = true;
      if (reference) {
        const double lo = c.values.front() - tol, hi = c.values.back() + tol;
        const auto inside = std::count_if(reference->values.begin(), reference->values.end(),
                                          [&](double v) { return v >= lo && v <= hi; });
        keep = static_cast<std::size_t>(inside) < c.values.size();
      }
      if (keep) report.clusters.push_back(std::move(c));
    }
    i = j;
  }
  return report;
}

// ---------------------------------------------------- noise-scaling study

Vec noise_study_spectrum(std::size_t dim) {
  // Eigenvalues spread uniformly over [1, 10].
  Vec d(dim);
  for (std::size_t i = 0; i < dim; ++i)
    d[i] = 1.0 + 9.0 * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(dim - 1, 1));
  return d;
}

namespace {

// ||T_noisy - Q^T H Q|| for the basis Q the noisy run produced.
double projected_delta(LinearOperator& exact, const LanczosResult& run) {
  const std::size_t k = run.steps;
  const std::size_t n = exact.dim();
  std::vector<Vec> hq(k, Vec(n));
  for (std::size_t j = 0; j < k; ++j) exact.apply(run.basis[j], hq[j]);
  Vec delta(k * k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      double t = 0.0;
      if (i == j) t = run.t.alpha[i];
      else if (j == i + 1) t = run.t.beta[i];
      const double p = 0.5 * (dot(run.basis[i], hq[j]) + dot(run.basis[j], hq[i]));
      delta[i * k + j] = delta[j * k + i] = t - p;
    }
  }
  return numerics::symmetric_spectral_norm(delta, k);
}

double mean_delta(std::size_t m, double sigma_f, const NoiseScalingConfig& cfg, double* eta_out) {
  DiagonalOperator exact(noise_study_spectrum(cfg.dim));
  LanczosConfig lc;
  lc.m = m;
  lc.reorth = ReorthPolicy::full();
  double acc = 0.0, eta = 0.0;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    Vec start(cfg.dim);
    Rng(cfg.seed, t).fill_normal(start);
    NoisyOperator noisy(exact, cfg.noise_scale * std::sqrt(sigma_f), cfg.seed, 1000003 + t);
    const auto run = lanczos(noisy, start, lc);
    acc += projected_delta(exact, run);
    eta += eta_bar(run);
  }
  if (eta_out) *eta_out = eta / static_cast<double>(cfg.trials);
  return acc / static_cast<double>(cfg.trials);
}

}  // namespace

NoiseScalingResult fd_lanczos_noise_scaling(const NoiseScalingConfig& cfg) {
  if (cfg.trials == 0) throw std::invalid_argument("noise scaling: need at least one trial");
  NoiseScalingResult res;
  Vec xs, ys;
  for (std::size_t m : cfg.m_grid) {
    if (m > cfg.dim) throw std::invalid_argument("noise scaling: m exceeds dim");
    double eta = 0.0;
    const double d = mean_delta(m, cfg.sigma_for_m, cfg, &eta);
    res.m_sweep.push_back({m, cfg.sigma_for_m, d});
    res.eta_bar = eta;
    xs.push_back(static_cast<double>(m));
    ys.push_back(d);
  }
  if (xs.size() >= 2) res.slope_m = numerics::fit_loglog(xs, ys).slope;

  xs.clear();
  ys.clear();
  const std::size_t m_mid = cfg.m_grid.empty() ? std::min<std::size_t>(32, cfg.dim) : cfg.m_grid[cfg.m_grid.size() / 2];
  for (double s : cfg.sigma_grid) {
    const double d = mean_delta(m_mid, s, cfg, nullptr);
    res.sigma_sweep.push_back({m_mid, s, d});
    if (s > 0.0) {
      xs.push_back(s);
      ys.push_back(d);
    }
  }
  if (xs.size() >= 2) res.slope_sigma = numerics::fit_loglog(xs, ys).slope;
  return res;
}

}  // namespace curvkit::krylov
