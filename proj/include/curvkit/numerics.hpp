// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "curvkit/vec.hpp"

namespace curvkit::numerics {

struct QuadratureRule {
  Vec nodes;
  Vec weights;
};

/// n-point Gauss-Legendre rule on [lo, hi]; nodes from Newton iteration on
/// P_n started at the Chebyshev guesses.
QuadratureRule gauss_legendre(std::size_t n, double lo, double hi);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = slope * x + intercept. Needs >= 2 points.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Least-squares slope of log10(y) against log10(x).
LineFit fit_loglog(std::span<const double> x, std::span<const double> y);

/// `count` points log-spaced over [lo, hi], inclusive.
Vec logspace(double lo, double hi, std::size_t count);

/// Location of the minimum of y over x, refined by a parabola through the
/// grid minimum and its neighbours in (log10 x, log10 y).
double refined_log_argmin(std::span<const double> x, std::span<const double> y);

/// Eigenvalues (ascending) of a dense symmetric n x n row-major matrix by
/// cyclic Jacobi rotations.
Vec symmetric_eigenvalues(std::span<const double> a, std::size_t n);

/// Largest |eigenvalue| of a dense symmetric matrix.
double symmetric_spectral_norm(std::span<const double> a, std::size_t n);

/// Exact running sum of doubles as a nonoverlapping expansion; value() is
/// the correctly rounded total, independent of the order of add() calls.
/// Inputs must be finite.
class ExactSum {
 public:
  void add(double x);
  double value() const;
  void clear() { partials_.clear(); }
  /// Adds another exact sum without rounding.
  void merge(const ExactSum& other);
  /// Doubles held by the expansion (its wire size).
  std::size_t terms() const { return partials_.size(); }

 private:
  std::vector<double> partials_;
};

/// Element-wise ExactSum over a fixed-length vector.
class ExactVectorSum {
 public:
  explicit ExactVectorSum(std::size_t n = 0) : sums_(n) {}
  std::size_t size() const { return sums_.size(); }
  /// Adds scale * x[i] to element offset + i; the product is rounded once.
  void add(std::span<const double> x, double scale = 1.0, std::size_t offset = 0);
  Vec value() const;

 private:
  std::vector<ExactSum> sums_;
};

double mean(std::span<const double> xs);
/// Population standard deviation.
double stddev(std::span<const double> xs);

}  // namespace curvkit::numerics
