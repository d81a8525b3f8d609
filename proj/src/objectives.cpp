// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "curvkit/objectives.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "curvkit/rng.hpp"

namespace curvkit {

// ------------------------------------------------------------- DenseMatrix

void DenseMatrix::multiply(std::span<const double> x, std::span<double> out) const {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    const double* row = data.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) s += row[j] * x[j];
    out[i] = s;
  }
}

Vec DenseMatrix::multiply(std::span<const double> x) const {
  Vec out(n);
  multiply(x, out);
  return out;
}

bool DenseMatrix::is_symmetric() const {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if ((*this)(i, j) != (*this)(j, i)) return false;
  return true;
}

DenseMatrix DenseMatrix::identity(std::size_t size) {
  DenseMatrix m(size);
  for (std::size_t i = 0; i < size; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> d) {
  DenseMatrix m(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

// --------------------------------------------------------------- Objective

Objective::Objective(Vec batch_weights) : weights_(std::move(batch_weights)) {
  if (weights_.empty()) throw std::invalid_argument("objective needs at least one batch");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w > 0.0) || !std::isfinite(w))
      throw std::invalid_argument("batch weights must be positive and finite");
    total += w;
  }
  for (double& w : weights_) w /= total;
}

double Objective::weight_sum() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

double Objective::loss_batch(std::span<const double> theta, std::size_t batch) const {
  Vec scratch(dim());
  return eval_batch(theta, batch, scratch);
}

double Objective::loss(std::span<const double> theta) const {
  double total = 0.0;
  for (std::size_t b = 0; b < batch_count(); ++b) total += weights_[b] * loss_batch(theta, b);
  return total;
}

double Objective::eval(std::span<const double> theta, std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  Vec g(dim());
  double total = 0.0;
  for (std::size_t b = 0; b < batch_count(); ++b) {
    total += weights_[b] * eval_batch(theta, b, g);
    axpy(weights_[b], g, grad);
  }
  return total;
}

Vec Objective::gradient(std::span<const double> theta) const {
  Vec g(dim());
  eval(theta, g);
  return g;
}

std::optional<DenseMatrix> Objective::exact_hessian(std::span<const double>) const {
  return std::nullopt;
}

std::optional<Vec> Objective::exact_hvp(std::span<const double> theta,
                                        std::span<const double> v) const {
  auto h = exact_hessian(theta);
  if (!h) return std::nullopt;
  return h->multiply(v);
}

std::optional<double> Objective::exact_curvature(std::span<const double> theta,
                                                 std::span<const double> v) const {
  auto hv = exact_hvp(theta, v);
  if (!hv) return std::nullopt;
  return dot(v, *hv);
}

std::optional<Vec> Objective::exact_third_gradient(std::span<const double>,
                                                   std::span<const double>) const {
  return std::nullopt;
}

std::optional<double> Objective::exact_fourth_directional(std::span<const double>,
                                                          std::span<const double>) const {
  return std::nullopt;
}

// ---------------------------------------------------------------- quadratic

QuadraticObjective::QuadraticObjective(DenseMatrix a) : Objective(Vec{1.0}), a_(std::move(a)) {
  if (a_.n == 0) throw std::invalid_argument("quadratic: empty matrix");
  if (!a_.is_symmetric()) throw std::invalid_argument("quadratic: matrix is not symmetric");
  if (!all_finite(a_.data)) throw std::invalid_argument("quadratic: non-finite entry");
}

double QuadraticObjective::eval_batch(std::span<const double> theta, std::size_t,
                                      std::span<double> grad) const {
  a_.multiply(theta, grad);
  return 0.5 * dot(theta, grad);
}

std::optional<DenseMatrix> QuadraticObjective::exact_hessian(std::span<const double>) const {
  return a_;
}

std::optional<Vec> QuadraticObjective::exact_hvp(std::span<const double>,
                                                 std::span<const double> v) const {
  return a_.multiply(v);
}

std::optional<Vec> QuadraticObjective::exact_third_gradient(std::span<const double>,
                                                            std::span<const double>) const {
  return Vec(a_.n, 0.0);
}

std::optional<double> QuadraticObjective::exact_fourth_directional(std::span<const double>,
                                                                   std::span<const double>) const {
  return 0.0;
}

std::shared_ptr<const QuadraticObjective> make_quadratic(const QuadraticSpec& spec) {
  return std::make_shared<const QuadraticObjective>(spec.matrix);
}

DenseMatrix random_symmetric(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed, 3);
  DenseMatrix g(dim);
  for (double& x : g.data) x = rng.normal();
  DenseMatrix a(dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) a(i, j) = 0.5 * (g(i, j) + g(j, i));
  return a;
}

DenseMatrix random_spd(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed, 4);
  DenseMatrix g(dim);
  for (double& x : g.data) x = rng.normal();
  DenseMatrix a(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) s += g(i, k) * g(j, k);
      s /= static_cast<double>(dim);
      if (i == j) s += 1.0;
      a(i, j) = s;
      a(j, i) = s;
    }
  }
  return a;
}

DenseMatrix coupled_block_matrix(std::size_t dim, std::size_t blocks, double coupling,
                                 std::uint64_t seed) {
  if (blocks == 0 || blocks > dim) throw std::invalid_argument("coupled_block_matrix: bad block count");
  const auto bounds = split_boundaries(dim, blocks);
  std::vector<std::size_t> block_of(dim);
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t i = bounds[b]; i < bounds[b + 1]; ++i) block_of[i] = b;

  Rng rng(seed, 5);
  DenseMatrix diag_part(dim);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = bounds[b];
    const std::size_t n = bounds[b + 1] - lo;
    Vec g(n * n);
    for (double& x : g) x = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += g[i * n + k] * g[j * n + k];
        s /= static_cast<double>(n);
        if (i == j) s += 1.0;
        diag_part(lo + i, lo + j) = s;
        diag_part(lo + j, lo + i) = s;
      }
    }
  }
  DenseMatrix a = diag_part;
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double c = rng.normal() / std::sqrt(static_cast<double>(dim));
      if (block_of[i] == block_of[j]) continue;
      a(i, j) += coupling * c;
      a(j, i) = a(i, j);
    }
  }
  return a;
}

// ------------------------------------------------------------------ rippled

namespace {

// k-th derivative of sin evaluated at x.
double sin_derivative(int k, double x) {
  switch (k % 4) {
    case 0: return std::sin(x);
    case 1: return std::cos(x);
    case 2: return -std::sin(x);
    default: return -std::cos(x);
  }
}

}  // namespace

RippledObjective::RippledObjective(RippledSurfaceSpec spec) : Objective(Vec{1.0}), spec_(spec) {
  if (spec_.dims != 1 && spec_.dims != 2) throw std::invalid_argument("rippled: dims must be 1 or 2");
  if (!(spec_.frequency > 0.0)) throw std::invalid_argument("rippled: frequency must be positive");
  if (!std::isfinite(spec_.amplitude) || !std::isfinite(spec_.smooth_coeff))
    throw std::invalid_argument("rippled: non-finite coefficient");
}

double RippledObjective::partial(int a, int b, std::span<const double> theta) const {
  const double w = spec_.frequency;
  const double amp = spec_.amplitude;
  if (spec_.dims == 1) {
    if (b != 0) return 0.0;
    return spec_.smooth_coeff * sin_derivative(a, theta[0]) +
           amp * std::pow(w, a) * sin_derivative(a, w * theta[0]);
  }
  const double x = theta[0];
  const double y = theta[1];
  double bowl = 0.0;
  if (a == 0 && b == 0) bowl = 0.5 * (x * x + y * y);
  else if (a == 1 && b == 0) bowl = x;
  else if (a == 0 && b == 1) bowl = y;
  else if ((a == 2 && b == 0) || (a == 0 && b == 2)) bowl = 1.0;
  return bowl + amp * std::pow(w, a + b) * sin_derivative(a, w * x) * sin_derivative(b, w * y);
}

double RippledObjective::eval_batch(std::span<const double> theta, std::size_t,
                                    std::span<double> grad) const {
  if (spec_.dims == 1) {
    grad[0] = partial(1, 0, theta);
  } else {
    grad[0] = partial(1, 0, theta);
    grad[1] = partial(0, 1, theta);
  }
  return partial(0, 0, theta);
}

double RippledObjective::loss_batch(std::span<const double> theta, std::size_t) const {
  return partial(0, 0, theta);
}

std::optional<DenseMatrix> RippledObjective::exact_hessian(std::span<const double> theta) const {
  DenseMatrix h(dim());
  if (spec_.dims == 1) {
    h(0, 0) = partial(2, 0, theta);
  } else {
    h(0, 0) = partial(2, 0, theta);
    h(0, 1) = h(1, 0) = partial(1, 1, theta);
    h(1, 1) = partial(0, 2, theta);
  }
  return h;
}

std::optional<Vec> RippledObjective::exact_hvp(std::span<const double> theta,
                                               std::span<const double> v) const {
  return exact_hessian(theta)->multiply(v);
}

std::optional<Vec> RippledObjective::exact_third_gradient(std::span<const double> theta,
                                                          std::span<const double> v) const {
  if (spec_.dims == 1) return Vec{partial(4, 0, theta) * v[0] * v[0] * v[0]};
  // d/dx_i sum_{jkl} f_{ijkl} v_j v_k v_l, expanded over the multiset of
  // (x, y) derivative orders.
  Vec out(2, 0.0);
  for (int i = 0; i < 2; ++i) {
    for (int mask = 0; mask < 8; ++mask) {
      int a = (i == 0) ? 1 : 0;
      int b = (i == 1) ? 1 : 0;
      double coeff = 1.0;
      for (int k = 0; k < 3; ++k) {
        if (mask & (1 << k)) {
          ++b;
          coeff *= v[1];
        } else {
          ++a;
          coeff *= v[0];
        }
      }
      out[static_cast<std::size_t>(i)] += coeff * partial(a, b, theta);
    }
  }
  return out;
}

std::optional<double> RippledObjective::exact_fourth_directional(std::span<const double> theta,
                                                                 std::span<const double> v) const {
  if (spec_.dims == 1) return partial(4, 0, theta) * std::pow(v[0], 4);
  double s = 0.0;
  for (int mask = 0; mask < 16; ++mask) {
    int a = 0, b = 0;
    double coeff = 1.0;
    for (int k = 0; k < 4; ++k) {
      if (mask & (1 << k)) {
        ++b;
        coeff *= v[1];
      } else {
        ++a;
        coeff *= v[0];
      }
    }
    s += coeff * partial(a, b, theta);
  }
  return s;
}

std::shared_ptr<const RippledObjective> make_rippled(const RippledSurfaceSpec& spec) {
  return std::make_shared<const RippledObjective>(spec);
}

// ---------------------------------------------------------------------- mlp

std::vector<std::size_t> split_boundaries(std::size_t n, std::size_t k) {
  if (k == 0 || k > n) throw std::invalid_argument("split_boundaries: need 1 <= parts <= items");
  std::vector<std::size_t> bounds(k + 1, 0);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  for (std::size_t i = 0; i < k; ++i) bounds[i + 1] = bounds[i] + base + (i < extra ? 1 : 0);
  return bounds;
}

Dataset make_regression_dataset(std::size_t input_dim, std::size_t output_dim,
                                std::size_t points, std::uint64_t seed) {
  Dataset d;
  d.input_dim = input_dim;
  d.output_dim = output_dim;
  Rng rng(seed, 1);
  d.inputs.resize(points * input_dim);
  for (double& x : d.inputs) x = rng.uniform(-1.0, 1.0);
  Vec teacher(output_dim * input_dim);
  const double s = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (double& a : teacher) a = s * rng.normal();
  d.targets.resize(points * output_dim);
  for (std::size_t p = 0; p < points; ++p) {
    for (std::size_t j = 0; j < output_dim; ++j) {
      double z = 0.0;
      for (std::size_t i = 0; i < input_dim; ++i)
        z += teacher[j * input_dim + i] * d.inputs[p * input_dim + i];
      d.targets[p * output_dim + j] = std::sin(std::numbers::pi * z);
    }
  }
  return d;
}

namespace {

Vec default_weights(const std::vector<std::size_t>& bounds) {
  Vec w(bounds.size() - 1);
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b)
    w[b] = static_cast<double>(bounds[b + 1] - bounds[b]);
  return w;
}

}  // namespace

MlpObjective::MlpObjective(std::vector<std::size_t> layer_sizes, Dataset data,
                           std::size_t batches, Vec batch_weights)
    : Objective(batch_weights.empty() ? default_weights(split_boundaries(data.size(), batches))
                                      : batch_weights),
      layers_(std::move(layer_sizes)),
      data_(std::move(data)) {
  if (layers_.size() < 2) throw std::invalid_argument("mlp: need at least input and output sizes");
  for (std::size_t s : layers_)
    if (s == 0) throw std::invalid_argument("mlp: zero layer size");
  if (data_.input_dim != layers_.front() || data_.output_dim != layers_.back())
    throw std::invalid_argument("mlp: layer sizes do not match dataset dimensions");
  if (data_.targets.size() != data_.size() * data_.output_dim)
    throw std::invalid_argument("mlp: dataset inputs and targets disagree");
  batch_bounds_ = split_boundaries(data_.size(), batches);
  if (batch_weights.size() != 0 && batch_weights.size() != batches)
    throw std::invalid_argument("mlp: one weight per batch required");
  offsets_.push_back(0);
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l)
    offsets_.push_back(offsets_.back() + layers_[l + 1] * layers_[l] + layers_[l + 1]);
  dim_ = offsets_.back();
}

double MlpObjective::eval_batch(std::span<const double> theta, std::size_t batch,
                                std::span<double> grad) const {
  const std::size_t nl = layer_count();
  const std::size_t lo = batch_bounds_[batch];
  const std::size_t hi = batch_bounds_[batch + 1];
  const double inv_n = 1.0 / static_cast<double>(hi - lo);
  std::fill(grad.begin(), grad.end(), 0.0);

  std::vector<Vec> acts(nl + 1);
  std::vector<Vec> delta(nl);
  double loss = 0.0;
  for (std::size_t p = lo; p < hi; ++p) {
    acts[0].assign(data_.inputs.begin() + static_cast<std::ptrdiff_t>(p * data_.input_dim),
                   data_.inputs.begin() + static_cast<std::ptrdiff_t>((p + 1) * data_.input_dim));
    for (std::size_t l = 0; l < nl; ++l) {
      const std::size_t in = layers_[l], out = layers_[l + 1];
      const double* w = theta.data() + offsets_[l];
      const double* bias = w + out * in;
      acts[l + 1].assign(out, 0.0);
      for (std::size_t i = 0; i < out; ++i) {
        double z = bias[i];
        for (std::size_t j = 0; j < in; ++j) z += w[i * in + j] * acts[l][j];
        acts[l + 1][i] = (l + 1 < nl) ? std::tanh(z) : z;
      }
    }
    const double* y = data_.targets.data() + p * data_.output_dim;
    delta[nl - 1].assign(layers_[nl], 0.0);
    for (std::size_t i = 0; i < layers_[nl]; ++i) {
      const double r = acts[nl][i] - y[i];
      loss += 0.5 * r * r * inv_n;
      delta[nl - 1][i] = r * inv_n;
    }
    for (std::size_t l = nl; l-- > 0;) {
      const std::size_t in = layers_[l], out = layers_[l + 1];
      const double* w = theta.data() + offsets_[l];
      double* gw = grad.data() + offsets_[l];
      double* gb = gw + out * in;
      for (std::size_t i = 0; i < out; ++i) {
        const double d = delta[l][i];
        gb[i] += d;
        for (std::size_t j = 0; j < in; ++j) gw[i * in + j] += d * acts[l][j];
      }
      if (l == 0) break;
      delta[l - 1].assign(in, 0.0);
      for (std::size_t j = 0; j < in; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < out; ++i) s += w[i * in + j] * delta[l][i];
        const double a = acts[l][j];
        delta[l - 1][j] = s * (1.0 - a * a);
      }
    }
  }
  return loss;
}

double MlpObjective::loss_batch(std::span<const double> theta, std::size_t batch) const {
  const std::size_t nl = layer_count();
  const std::size_t lo = batch_bounds_[batch];
  const std::size_t hi = batch_bounds_[batch + 1];
  Vec cur, next;
  double loss = 0.0;
  for (std::size_t p = lo; p < hi; ++p) {
    cur.assign(data_.inputs.begin() + static_cast<std::ptrdiff_t>(p * data_.input_dim),
               data_.inputs.begin() + static_cast<std::ptrdiff_t>((p + 1) * data_.input_dim));
    for (std::size_t l = 0; l < nl; ++l) {
      const std::size_t in = layers_[l], out = layers_[l + 1];
      const double* w = theta.data() + offsets_[l];
      const double* bias = w + out * in;
      next.assign(out, 0.0);
      for (std::size_t i = 0; i < out; ++i) {
        double z = bias[i];
        for (std::size_t j = 0; j < in; ++j) z += w[i * in + j] * cur[j];
        next[i] = (l + 1 < nl) ? std::tanh(z) : z;
      }
      std::swap(cur, next);
    }
    const double* y = data_.targets.data() + p * data_.output_dim;
    for (std::size_t i = 0; i < layers_[nl]; ++i) {
      const double r = cur[i] - y[i];
      loss += 0.5 * r * r;
    }
  }
  return loss / static_cast<double>(hi - lo);
}

std::optional<double> MlpObjective::exact_curvature(std::span<const double> theta,
                                                    std::span<const double> v) const {
  // Jets (value, d/dt, d^2/dt^2) of every activation along theta + t v.
  const std::size_t nl = layer_count();
  const auto weights = batch_weights();
  double total = 0.0;
  Vec a0, a1, a2, z0, z1, z2;
  for (std::size_t b = 0; b < batch_count(); ++b) {
    const std::size_t lo = batch_bounds_[b];
    const std::size_t hi = batch_bounds_[b + 1];
    double batch_curv = 0.0;
    for (std::size_t p = lo; p < hi; ++p) {
      a0.assign(data_.inputs.begin() + static_cast<std::ptrdiff_t>(p * data_.input_dim),
                data_.inputs.begin() + static_cast<std::ptrdiff_t>((p + 1) * data_.input_dim));
      a1.assign(a0.size(), 0.0);
      a2.assign(a0.size(), 0.0);
      for (std::size_t l = 0; l < nl; ++l) {
        const std::size_t in = layers_[l], out = layers_[l + 1];
        const double* w = theta.data() + offsets_[l];
        const double* bias = w + out * in;
        const double* vw = v.data() + offsets_[l];
        const double* vb = vw + out * in;
        z0.assign(out, 0.0);
        z1.assign(out, 0.0);
        z2.assign(out, 0.0);
        for (std::size_t i = 0; i < out; ++i) {
          double s0 = bias[i], s1 = vb[i], s2 = 0.0;
          for (std::size_t j = 0; j < in; ++j) {
            const double wij = w[i * in + j], vij = vw[i * in + j];
            s0 += wij * a0[j];
            s1 += vij * a0[j] + wij * a1[j];
            s2 += 2.0 * vij * a1[j] + wij * a2[j];
          }
          z0[i] = s0;
          z1[i] = s1;
          z2[i] = s2;
        }
        if (l + 1 < nl) {
          for (std::size_t i = 0; i < out; ++i) {
            const double y = std::tanh(z0[i]);
            const double dy = 1.0 - y * y;
            z2[i] = dy * z2[i] - 2.0 * y * dy * z1[i] * z1[i];
            z1[i] = dy * z1[i];
            z0[i] = y;
          }
        }
        std::swap(a0, z0);
        std::swap(a1, z1);
        std::swap(a2, z2);
      }
      const double* y = data_.targets.data() + p * data_.output_dim;
      for (std::size_t i = 0; i < layers_[nl]; ++i)
        batch_curv += a1[i] * a1[i] + (a0[i] - y[i]) * a2[i];
    }
    total += weights[b] * batch_curv / static_cast<double>(hi - lo);
  }
  return total;
}

Vec MlpObjective::initial_parameters(std::uint64_t seed) const {
  Rng rng(seed, 2);
  Vec theta(dim_);
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const std::size_t in = layers_[l], out = layers_[l + 1];
    const double s = 1.0 / std::sqrt(static_cast<double>(in));
    double* w = theta.data() + offsets_[l];
    for (std::size_t i = 0; i < out * in; ++i) w[i] = s * rng.normal();
    for (std::size_t i = 0; i < out; ++i) w[out * in + i] = 0.1 * rng.normal();
  }
  return theta;
}

std::shared_ptr<const MlpObjective> make_mlp(const std::vector<std::size_t>& layer_sizes,
                                             const DatasetSpec& data, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("mlp: need at least input and output sizes");
  auto dataset = make_regression_dataset(layer_sizes.front(), layer_sizes.back(), data.points, seed);
  return std::make_shared<const MlpObjective>(layer_sizes, std::move(dataset), data.batches,
                                              data.batch_weights);
}

}  // namespace curvkit
