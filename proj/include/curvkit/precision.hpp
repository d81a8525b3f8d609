// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Storage-precision emulation. All arithmetic is carried out in fp64; values
// are then rounded to the declared storage format so that fp64 ground truth
// stays available next to the low-precision result.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace curvkit {

enum class Precision { fp64, fp32, bf16 };

/// Unit-in-the-first-place machine epsilon of each storage format
/// (2^-52, 2^-23, 2^-8).
constexpr double machine_epsilon(Precision p) {
  switch (p) {
    case Precision::fp64: return 2.220446049250313e-16;
    case Precision::fp32: return 1.1920928955078125e-07;
    case Precision::bf16: return 3.90625e-03;
  }
  return 0.0;
}

/// Round-to-nearest-even into the storage format. bf16 keeps 8 significand
/// bits (fp32 exponent range); fp32 keeps 24.
inline double round_to(double x, Precision p) {
  switch (p) {
    case Precision::fp64:
      return x;
    case Precision::fp32:
      return static_cast<double>(static_cast<float>(x));
    case Precision::bf16: {
      if (x == 0.0 || !std::isfinite(x)) return x;
      int exp = 0;
      std::frexp(x, &exp);
      // nearbyint honours the default round-half-even mode.
      const double scaled = std::ldexp(x, 8 - exp);
      const double r = std::ldexp(std::nearbyint(scaled), exp - 8);
      return static_cast<double>(static_cast<float>(r));
    }
  }
  return x;
}

inline void round_in_place(std::span<double> xs, Precision p) {
  if (p == Precision::fp64) return;
  for (double& x : xs) x = round_to(x, p);
}

inline std::string_view to_string(Precision p) {
  switch (p) {
    case Precision::fp64: return "fp64";
    case Precision::fp32: return "fp32";
    case Precision::bf16: return "bf16";
  }
  return "?";
}

inline Precision parse_precision(std::string_view s) {
  if (s == "fp64") return Precision::fp64;
  if (s == "fp32") return Precision::fp32;
  if (s == "bf16") return Precision::bf16;
  throw std::invalid_argument("unknown precision '" + std::string(s) + "'");
}

}  // namespace curvkit
