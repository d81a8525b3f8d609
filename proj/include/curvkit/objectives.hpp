// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Analytic test objectives. Every estimator in the library is validated
// against one of these: each returns an exact loss and gradient per batch,
// and where the Hessian is known in closed form it is exposed for tests.
//
// MLP parameter flattening is layer-major; inside a layer the weight matrix
// comes first (row-major, out x in) followed by the bias vector. The block
// boundaries returned by MlpObjective::layer_offsets() follow this order.

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "curvkit/vec.hpp"

namespace curvkit {

/// Row-major dense square matrix.
struct DenseMatrix {
  std::size_t n = 0;
  Vec data;

  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t size) : n(size), data(size * size, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }

  void multiply(std::span<const double> x, std::span<double> out) const;
  Vec multiply(std::span<const double> x) const;
  bool is_symmetric() const;

  static DenseMatrix identity(std::size_t size);
  static DenseMatrix diagonal(std::span<const double> d);
};

/// Raised when a gradient evaluation produced NaN or Inf.
class NonFiniteGradient : public std::runtime_error {
 public:
  NonFiniteGradient(std::size_t batch, const std::string& where)
      : std::runtime_error("non-finite gradient in batch " + std::to_string(batch) + " (" + where + ")"),
        batch_(batch) {}
  std::size_t batch() const { return batch_; }

 private:
  std::size_t batch_;
};

/// Loss/gradient oracle over a fixed set of weighted batches.
///
/// Batch weights are normalised to sum to one at construction, so the
/// dataset loss sum_b w_b l_b is a weighted mean. Instances are immutable and
/// safe to evaluate concurrently.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t dim() const = 0;
  virtual std::string kind() const = 0;

  std::size_t batch_count() const { return weights_.size(); }
  std::span<const double> batch_weights() const { return weights_; }
  /// Sequential sum of the stored weights (one up to rounding).
  double weight_sum() const;

  /// Loss of one batch; the batch gradient overwrites `grad`.
  virtual double eval_batch(std::span<const double> theta, std::size_t batch,
                            std::span<double> grad) const = 0;
  virtual double loss_batch(std::span<const double> theta, std::size_t batch) const;

  /// Dataset loss sum_b w_b l_b.
  double loss(std::span<const double> theta) const;
  /// Dataset loss; `grad` receives sum_b w_b g_b.
  double eval(std::span<const double> theta, std::span<double> grad) const;
  Vec gradient(std::span<const double> theta) const;

  // Exact second-order information, where available in closed form.
  virtual std::optional<DenseMatrix> exact_hessian(std::span<const double> theta) const;
  virtual std::optional<Vec> exact_hvp(std::span<const double> theta, std::span<const double> v) const;
  /// v^T H(theta) v.
  virtual std::optional<double> exact_curvature(std::span<const double> theta,
                                                std::span<const double> v) const;
  /// grad_theta(D_v^3 L(theta)), the vector in the gradient-FD truncation term.
  virtual std::optional<Vec> exact_third_gradient(std::span<const double> theta,
                                                  std::span<const double> v) const;
  /// D^4 L(theta)[v, v, v, v].
  virtual std::optional<double> exact_fourth_directional(std::span<const double> theta,
                                                         std::span<const double> v) const;

 protected:
  explicit Objective(Vec batch_weights);

 private:
  Vec weights_;
};

using ObjectivePtr = std::shared_ptr<const Objective>;

// ---------------------------------------------------------------- quadratic

struct QuadraticSpec {
  DenseMatrix matrix;
};

/// L(theta) = 1/2 theta^T A theta on a single batch.
class QuadraticObjective final : public Objective {
 public:
  explicit QuadraticObjective(DenseMatrix a);

  std::size_t dim() const override { return a_.n; }
  std::string kind() const override { return "quadratic"; }
  const DenseMatrix& matrix() const { return a_; }

  double eval_batch(std::span<const double> theta, std::size_t batch,
                    std::span<double> grad) const override;
  std::optional<DenseMatrix> exact_hessian(std::span<const double> theta) const override;
  std::optional<Vec> exact_hvp(std::span<const double> theta,
                               std::span<const double> v) const override;
  std::optional<Vec> exact_third_gradient(std::span<const double> theta,
                                          std::span<const double> v) const override;
  std::optional<double> exact_fourth_directional(std::span<const double> theta,
                                                 std::span<const double> v) const override;

 private:
  DenseMatrix a_;
};

/// Rejects a non-symmetric matrix with std::invalid_argument.
std::shared_ptr<const QuadraticObjective> make_quadratic(const QuadraticSpec& spec);

/// (G + G^T) / 2 with G_ij ~ N(0, 1).
DenseMatrix random_symmetric(std::size_t dim, std::uint64_t seed);
/// G G^T / dim + I, a well-conditioned SPD matrix.
DenseMatrix random_spd(std::size_t dim, std::uint64_t seed);
/// B + c * C where B is block diagonal SPD on `blocks` equal contiguous blocks
/// and C is symmetric with zero diagonal blocks; both drawn from `seed`.
DenseMatrix coupled_block_matrix(std::size_t dim, std::size_t blocks, double coupling,
                                 std::uint64_t seed);

// ----------------------------------------------------------------- rippled

struct RippledSurfaceSpec {
  double amplitude = 0.05;    // B
  double frequency = 40.0;    // omega
  int dims = 2;               // 1 or 2
  double smooth_coeff = 1.0;  // A, the 1D smooth term coefficient
};

/// dims == 2: f(x, y) = 1/2 (x^2 + y^2) + B sin(wx) sin(wy)
/// dims == 1: f(x)    = A sin(x) + B sin(wx)
class RippledObjective final : public Objective {
 public:
  explicit RippledObjective(RippledSurfaceSpec spec);

  std::size_t dim() const override { return static_cast<std::size_t>(spec_.dims); }
  std::string kind() const override { return "rippled"; }
  const RippledSurfaceSpec& spec() const { return spec_; }

  double eval_batch(std::span<const double> theta, std::size_t batch,
                    std::span<double> grad) const override;
  double loss_batch(std::span<const double> theta, std::size_t batch) const override;
  std::optional<DenseMatrix> exact_hessian(std::span<const double> theta) const override;
  std::optional<Vec> exact_hvp(std::span<const double> theta,
                               std::span<const double> v) const override;
  std::optional<Vec> exact_third_gradient(std::span<const double> theta,
                                          std::span<const double> v) const override;
  std::optional<double> exact_fourth_directional(std::span<const double> theta,
                                                 std::span<const double> v) const override;

  /// Mixed partial d^(a+b) f / dx^a dy^b (2D) or d^a f / dx^a (1D, b == 0).
  double partial(int a, int b, std::span<const double> theta) const;

 private:
  RippledSurfaceSpec spec_;
};

std::shared_ptr<const RippledObjective> make_rippled(const RippledSurfaceSpec& spec);

// --------------------------------------------------------------------- mlp

struct Dataset {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  Vec inputs;   // N x input_dim, row-major
  Vec targets;  // N x output_dim, row-major
  std::size_t size() const { return input_dim == 0 ? 0 : inputs.size() / input_dim; }
};

struct DatasetSpec {
  std::size_t points = 32;
  std::size_t batches = 4;
  Vec batch_weights;  // empty: proportional to batch sizes
};

/// Synthetic regression set. Inputs are U(-1, 1); each target coordinate is
/// sin(pi * a_j . x) for a teacher vector a_j ~ N(0, I / input_dim). All
/// draws come from Rng(seed, 1) in row order: inputs first, then teachers.
Dataset make_regression_dataset(std::size_t input_dim, std::size_t output_dim,
                                std::size_t points, std::uint64_t seed);

/// Fully connected network with tanh hidden units and a linear output layer.
/// Per-batch loss is (1 / (2 n_b)) sum_i ||f(x_i) - y_i||^2. Batches are
/// contiguous near-equal slices of the dataset, larger slices first.
class MlpObjective final : public Objective {
 public:
  MlpObjective(std::vector<std::size_t> layer_sizes, Dataset data, std::size_t batches,
               Vec batch_weights = {});

  std::size_t dim() const override { return dim_; }
  std::string kind() const override { return "mlp"; }
  const std::vector<std::size_t>& layer_sizes() const { return layers_; }
  /// Offsets of each layer's parameter block: size layer_count() + 1.
  const std::vector<std::size_t>& layer_offsets() const { return offsets_; }
  std::size_t layer_count() const { return layers_.size() - 1; }
  std::size_t batch_begin(std::size_t b) const { return batch_bounds_[b]; }
  std::size_t batch_end(std::size_t b) const { return batch_bounds_[b + 1]; }

  double eval_batch(std::span<const double> theta, std::size_t batch,
                    std::span<double> grad) const override;
  double loss_batch(std::span<const double> theta, std::size_t batch) const override;
  /// Second derivative of t -> L(theta + t v) at t = 0, propagated exactly
  /// through the forward pass with second-order Taylor jets.
  std::optional<double> exact_curvature(std::span<const double> theta,
                                        std::span<const double> v) const override;

  /// Weights ~ N(0, 1 / fan_in), biases ~ N(0, 0.01), drawn from Rng(seed, 2)
  /// in flattening order.
  Vec initial_parameters(std::uint64_t seed) const;

 private:
  std::vector<std::size_t> layers_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> batch_bounds_;
  Dataset data_;
  std::size_t dim_ = 0;
};

std::shared_ptr<const MlpObjective> make_mlp(const std::vector<std::size_t>& layer_sizes,
                                             const DatasetSpec& data, std::uint64_t seed);

/// Contiguous near-equal split of n items into k parts, remainder first.
std::vector<std::size_t> split_boundaries(std::size_t n, std::size_t k);

}  // namespace curvkit
