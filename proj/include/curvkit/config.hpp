// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: objective specs, their shorthand and JSON forms, and
// the fully resolved settings echoed into every output.
//
// Objective shorthand, as accepted by --oracle:
//   quadratic:diag1..32                      A = diag(1, ..., 32)
//   quadratic:random,dim=64,seed=11          (G + G^T) / 2
//   quadratic:random_spd,dim=64,seed=11      G G^T / dim + I
//   quadratic:coupled,dim=24,blocks=4,c=0.5,seed=5
//   rippled:B=0.05,omega=40,dims=2[,A=1]
//   mlp:layers=4-8-8-1,points=32,batches=4,seed=7

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "curvkit/objectives.hpp"
#include "curvkit/precision.hpp"

namespace curvkit::config {

/// Invalid user input; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ObjectiveSpec {
  std::string kind = "quadratic";  // quadratic | rippled | mlp
  std::uint64_t seed = 0;

  // quadratic
  std::string matrix = "diag";  // diag | random | random_spd | coupled
  std::size_t dim = 32;
  Vec diagonal;  // explicit entries for matrix == diag; empty means 1..dim
  std::size_t blocks = 4;
  double coupling = 0.5;

  // rippled
  double amplitude = 0.05;
  double frequency = 40.0;
  int dims = 2;
  double smooth_coeff = 1.0;

  // mlp
  std::vector<std::size_t> layers{4, 8, 8, 1};
  std::size_t points = 32;
  std::size_t batches = 4;
  Vec weights;
  /// Fraction of the generated dataset actually used (first rows).
  double subsample = 1.0;
};

/// Parses the shorthand above. Throws ConfigError.
ObjectiveSpec parse_objective(const std::string& text);

nlohmann::json to_json(const ObjectiveSpec& spec);
/// Unknown keys are rejected. Throws ConfigError.
ObjectiveSpec objective_from_json(const nlohmann::json& j);

/// Throws ConfigError on inconsistent settings.
void validate(const ObjectiveSpec& spec);

/// Builds the oracle. Throws ConfigError for invalid specs.
ObjectivePtr build_objective(const ObjectiveSpec& spec);

/// Default evaluation point: zeros for quadratics, (0.3, -0.2) or 1.0 for
/// the rippled surface, and the seeded initialisation for the MLP.
Vec default_point(const ObjectiveSpec& spec, const Objective& objective);

/// Contiguous blocks for the block test: layers for the MLP, the coupled
/// blocks for quadratics, otherwise `fallback_blocks` equal blocks.
std::vector<std::size_t> default_blocks(const ObjectiveSpec& spec, const Objective& objective,
                                        std::size_t fallback_blocks);

struct RunConfig {
  std::string command;  // spectrum | blockdiag | epssweep | cost | optbench
  ObjectiveSpec oracle;
  std::optional<double> epsilon;  // resolved per command when absent
  std::size_t m = 30;
  std::size_t s = 1;
  std::string reorth = "full";
  std::string precision = "fp64";       // basis storage (spectrum) or emulation (epssweep)
  std::string grad_precision = "fp64";  // gradient rounding inside FD products
  std::size_t ranks = 1;
  std::string hvp = "fd";  // exact | fd | sharded
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  std::string probe = "gaussian";  // gaussian | rademacher
  std::optional<double> smoothing;
  bool no_basis_storage = false;
  Vec point;      // empty: default_point
  Vec direction;  // epssweep probe; empty: ones
  std::size_t blocks = 0;  // blockdiag fallback block count; 0 = default
  // epssweep
  std::string estimator = "gradient_hvp";  // gradient_hvp | second_difference
  double sigma_f = 0.0;
  std::size_t trials = 1;
  double grid_lo = 1e-8;
  double grid_hi = 1.0;
  std::size_t grid_points = 41;
  // optbench
  std::size_t steps = 500;
  // cost
  nlohmann::json profile;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Accepts either a bare config or a manifest holding it under "config".
RunConfig run_config_from_json(const nlohmann::json& j);

/// Checks ranges and enum strings. Throws ConfigError.
void validate(const RunConfig& cfg);

}  // namespace curvkit::config
