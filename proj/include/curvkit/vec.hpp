// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat fp64 vector helpers and the ParamVector value type.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "curvkit/precision.hpp"

namespace curvkit {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(double alpha, std::span<double> x) {
  for (double& v : x) v *= alpha;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// ||a - b|| / ||b||, or ||a - b|| when b is zero.
inline double rel_error(std::span<const double> a, std::span<const double> b) {
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) num += (a[i] - b[i]) * (a[i] - b[i]);
  const double den = norm2(b);
  return den > 0.0 ? std::sqrt(num) / den : std::sqrt(num);
}

inline bool all_finite(std::span<const double> a) {
  for (double x : a)
    if (!std::isfinite(x)) return false;
  return true;
}

/// Parameter, probe or gradient vector with a declared storage precision.
/// Length is fixed at construction; entries must be finite.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(Vec values, Precision precision = Precision::fp64)
      : values_(std::move(values)), precision_(precision) {
    if (!all_finite(values_)) throw std::invalid_argument("ParamVector: non-finite entry");
    round_in_place(values_, precision_);
  }
  ParamVector(std::size_t n, Precision precision)
      : values_(n, 0.0), precision_(precision) {}

  std::size_t size() const { return values_.size(); }
  Precision precision() const { return precision_; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<const double> view() const { return values_; }
  std::span<double> mutable_view() { return values_; }
  const Vec& values() const { return values_; }

  /// Re-rounds every entry to the storage precision.
  void commit() { round_in_place(values_, precision_); }

 private:
  Vec values_;
  Precision precision_ = Precision::fp64;
};

}  // namespace curvkit
