// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "curvkit/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace curvkit::config {

using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("objective: '" + key + "' expects a number, got '" + v + "'");
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("objective: '" + key + "' expects a nonnegative integer, got '" + v + "'");
  }
}

// "1..32" -> 1, 2, ..., 32; "1;2;5" -> explicit list.
Vec parse_diag(const std::string& body) {
  const auto dots = body.find("..");
  if (dots != std::string::npos) {
    const double lo = to_double("diag", body.substr(0, dots));
    const double hi = to_double("diag", body.substr(dots + 2));
    if (lo != std::floor(lo) || hi != std::floor(hi) || hi < lo)
      throw ConfigError("objective: diag range must be integers lo..hi with lo <= hi");
    Vec d;
    for (double x = lo; x <= hi; x += 1.0) d.push_back(x);
    return d;
  }
  Vec d;
  for (const auto& tok : split(body, ';')) d.push_back(to_double("diag", tok));
  return d;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
void get(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
  }
}

const std::set<std::string> kPrecisions{"fp64", "fp32", "bf16"};

}  // namespace

ObjectiveSpec parse_objective(const std::string& text) {
  ObjectiveSpec spec;
  const auto colon = text.find(':');
  spec.kind = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  bool have_dim = false;
  for (const auto& raw : split(rest, ',')) {
    if (raw.empty()) continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos) {
      // Bare token: the quadratic matrix family, optionally with diag values.
      if (spec.kind != "quadratic") throw ConfigError("objective: unexpected token '" + raw + "'");
      if (raw.rfind("diag", 0) == 0) {
        spec.matrix = "diag";
        if (raw.size() > 4) spec.diagonal = parse_diag(raw.substr(4));
      } else {
        spec.matrix = raw;
      }
      continue;
    }
    const std::string key = raw.substr(0, eq), val = raw.substr(eq + 1);
    if (key == "seed") spec.seed = to_uint(key, val);
    else if (key == "subsample") spec.subsample = to_double(key, val);
    else if (spec.kind == "quadratic" && key == "dim") spec.dim = to_uint(key, val), have_dim = true;
    else if (spec.kind == "quadratic" && key == "blocks") spec.blocks = to_uint(key, val);
    else if (spec.kind == "quadratic" && (key == "c" || key == "coupling")) spec.coupling = to_double(key, val);
    else if (spec.kind == "rippled" && key == "B") spec.amplitude = to_double(key, val);
    else if (spec.kind == "rippled" && (key == "omega" || key == "w")) spec.frequency = to_double(key, val);
    else if (spec.kind == "rippled" && key == "dims") spec.dims = static_cast<int>(to_uint(key, val));
    else if (spec.kind == "rippled" && key == "A") spec.smooth_coeff = to_double(key, val);
    else if (spec.kind == "mlp" && key == "layers") {
      spec.layers.clear();
      for (const auto& t : split(val, '-')) spec.layers.push_back(to_uint(key, t));
    } else if (spec.kind == "mlp" && key == "points") spec.points = to_uint(key, val);
    else if (spec.kind == "mlp" && key == "batches") spec.batches = to_uint(key, val);
    else if (spec.kind == "mlp" && key == "weights") {
      spec.weights.clear();
      for (const auto& t : split(val, ';')) spec.weights.push_back(to_double(key, t));
    } else {
      throw ConfigError("objective: unknown key '" + key + "' for kind '" + spec.kind + "'");
    }
  }
  if (spec.kind == "quadratic" && spec.matrix == "diag" && !spec.diagonal.empty()) {
    if (have_dim && spec.dim != spec.diagonal.size()) throw ConfigError("objective: dim disagrees with diag entries");
    spec.dim = spec.diagonal.size();
  }
  validate(spec);
  return spec;
}

json to_json(const ObjectiveSpec& s) {
  json j{{"kind", s.kind}, {"seed", s.seed}};
  if (s.kind == "quadratic") {
    j["matrix"] = s.matrix;
    j["dim"] = s.dim;
    if (s.matrix == "diag") j["diagonal"] = s.diagonal;
    if (s.matrix == "coupled") {
      j["blocks"] = s.blocks;
      j["coupling"] = s.coupling;
    }
  } else if (s.kind == "rippled") {
    j["amplitude"] = s.amplitude;
    j["frequency"] = s.frequency;
    j["dims"] = s.dims;
    j["smooth_coeff"] = s.smooth_coeff;
  } else if (s.kind == "mlp") {
    j["layers"] = s.layers;
    j["points"] = s.points;
    j["batches"] = s.batches;
    j["weights"] = s.weights;
    j["subsample"] = s.subsample;
  }
  return j;
}

ObjectiveSpec objective_from_json(const json& j) {
  const std::string where = "oracle";
  check_keys(j,
             {"kind", "seed", "matrix", "dim", "diagonal", "blocks", "coupling", "amplitude", "frequency", "dims",
              "smooth_coeff", "layers", "points", "batches", "weights", "subsample"},
             where);
  ObjectiveSpec s;
  get(j, "kind", s.kind, where);
  get(j, "seed", s.seed, where);
  get(j, "matrix", s.matrix, where);
  get(j, "dim", s.dim, where);
  get(j, "diagonal", s.diagonal, where);
  get(j, "blocks", s.blocks, where);
  get(j, "coupling", s.coupling, where);
  get(j, "amplitude", s.amplitude, where);
  get(j, "frequency", s.frequency, where);
  get(j, "dims", s.dims, where);
  get(j, "smooth_coeff", s.smooth_coeff, where);
  get(j, "layers", s.layers, where);
  get(j, "points", s.points, where);
  get(j, "batches", s.batches, where);
  get(j, "weights", s.weights, where);
  get(j, "subsample", s.subsample, where);
  validate(s);
  return s;
}

void validate(const ObjectiveSpec& s) {
  if (s.kind == "quadratic") {
    static const std::set<std::string> kinds{"diag", "random", "random_spd", "coupled"};
    if (!kinds.count(s.matrix)) throw ConfigError("objective: unknown quadratic matrix '" + s.matrix + "'");
    if (s.dim == 0) throw ConfigError("objective: dim must be positive");
    if (s.matrix == "diag" && !s.diagonal.empty() && s.diagonal.size() != s.dim)
      throw ConfigError("objective: diagonal length differs from dim");
    if (s.matrix == "coupled" && (s.blocks == 0 || s.blocks > s.dim))
      throw ConfigError("objective: blocks must be in [1, dim]");
    if (!std::isfinite(s.coupling)) throw ConfigError("objective: coupling must be finite");
  } else if (s.kind == "rippled") {
    if (s.dims != 1 && s.dims != 2) throw ConfigError("objective: rippled dims must be 1 or 2");
    if (!std::isfinite(s.amplitude) || !std::isfinite(s.frequency) || !std::isfinite(s.smooth_coeff))
      throw ConfigError("objective: rippled coefficients must be finite");
  } else if (s.kind == "mlp") {
    if (s.layers.size() < 2) throw ConfigError("objective: mlp needs at least an input and an output layer");
    for (auto w : s.layers)
      if (w == 0) throw ConfigError("objective: mlp layer widths must be positive");
    if (s.batches == 0) throw ConfigError("objective: batches must be positive");
    if (!s.weights.empty() && s.weights.size() != s.batches)
      throw ConfigError("objective: need one weight per batch");
  } else {
    throw ConfigError("objective: unknown kind '" + s.kind + "' (quadratic, rippled, mlp)");
  }
  if (!(s.subsample > 0.0 && s.subsample <= 1.0)) throw ConfigError("objective: subsample must be in (0, 1]");
}

ObjectivePtr build_objective(const ObjectiveSpec& s) {
  validate(s);
  try {
    if (s.kind == "quadratic") {
      DenseMatrix a;
      if (s.matrix == "diag") {
        a = DenseMatrix(s.dim);
        for (std::size_t i = 0; i < s.dim; ++i) a(i, i) = s.diagonal.empty() ? double(i + 1) : s.diagonal[i];
      } else if (s.matrix == "random") {
        a = random_symmetric(s.dim, s.seed);
      } else if (s.matrix == "random_spd") {
        a = random_spd(s.dim, s.seed);
      } else {
        a = coupled_block_matrix(s.dim, s.blocks, s.coupling, s.seed);
      }
      return make_quadratic(QuadraticSpec{std::move(a)});
    }
    if (s.kind == "rippled") return make_rippled(RippledSurfaceSpec{s.amplitude, s.frequency, s.dims, s.smooth_coeff});
    Dataset data = make_regression_dataset(s.layers.front(), s.layers.back(), s.points, s.seed);
    const auto keep = std::max<std::size_t>(
        s.batches, static_cast<std::size_t>(std::llround(static_cast<double>(s.points) * s.subsample)));
    if (keep > data.size()) throw ConfigError("objective: fewer points than batches");
    data.inputs.resize(keep * data.input_dim);
    data.targets.resize(keep * data.output_dim);
    return std::make_shared<const MlpObjective>(s.layers, std::move(data), s.batches, s.weights);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("objective: ") + e.what());
  }
}

Vec default_point(const ObjectiveSpec& spec, const Objective& objective) {
  if (spec.kind == "rippled") return spec.dims == 2 ? Vec{0.3, -0.2} : Vec{1.0};
  if (spec.kind == "mlp") return dynamic_cast<const MlpObjective&>(objective).initial_parameters(spec.seed);
  return Vec(objective.dim(), 0.0);
}

std::vector<std::size_t> default_blocks(const ObjectiveSpec& spec, const Objective& objective,
                                        std::size_t fallback_blocks) {
  if (spec.kind == "mlp" && fallback_blocks == 0) return dynamic_cast<const MlpObjective&>(objective).layer_offsets();
  std::size_t k = fallback_blocks;
  if (k == 0) k = spec.kind == "quadratic" && spec.matrix == "coupled" ? spec.blocks : std::min<std::size_t>(4, objective.dim());
  if (k > objective.dim()) throw ConfigError("blocks: more blocks than parameters");
  return split_boundaries(objective.dim(), k);
}

// ---------------------------------------------------------------- RunConfig

json to_json(const RunConfig& c) {
  json j{{"command", c.command},
         {"oracle", to_json(c.oracle)},
         {"epsilon", c.epsilon ? json(*c.epsilon) : json(nullptr)},
         {"m", c.m},
         {"s", c.s},
         {"reorth", c.reorth},
         {"precision", c.precision},
         {"grad_precision", c.grad_precision},
         {"ranks", c.ranks},
         {"hvp", c.hvp},
         {"workers", c.workers},
         {"seed", c.seed},
         {"probe", c.probe},
         {"smoothing", c.smoothing ? json(*c.smoothing) : json(nullptr)},
         {"no_basis_storage", c.no_basis_storage},
         {"point", c.point},
         {"direction", c.direction},
         {"blocks", c.blocks},
         {"estimator", c.estimator},
         {"sigma_f", c.sigma_f},
         {"trials", c.trials},
         {"grid_lo", c.grid_lo},
         {"grid_hi", c.grid_hi},
         {"grid_points", c.grid_points},
         {"steps", c.steps},
         {"profile", c.profile}};
  return j;
}

RunConfig run_config_from_json(const json& in) {
  const json& j = in.is_object() && in.contains("config") ? in.at("config") : in;
  const std::string where = "config";
  check_keys(j,
             {"command", "oracle", "epsilon", "m", "s", "reorth", "precision", "grad_precision", "ranks", "hvp",
              "workers", "seed", "probe", "smoothing", "no_basis_storage", "point", "direction", "blocks",
              "estimator", "sigma_f", "trials", "grid_lo", "grid_hi", "grid_points", "steps", "profile"},
             where);
  RunConfig c;
  get(j, "command", c.command, where);
  if (j.contains("oracle")) {
    const auto& o = j.at("oracle");
    c.oracle = o.is_string() ? parse_objective(o.get<std::string>()) : objective_from_json(o);
  }
  if (j.contains("epsilon") && !j.at("epsilon").is_null()) c.epsilon = j.at("epsilon").get<double>();
  if (j.contains("smoothing") && !j.at("smoothing").is_null()) c.smoothing = j.at("smoothing").get<double>();
  get(j, "m", c.m, where);
  get(j, "s", c.s, where);
  get(j, "reorth", c.reorth, where);
  get(j, "precision", c.precision, where);
  get(j, "grad_precision", c.grad_precision, where);
  get(j, "ranks", c.ranks, where);
  get(j, "hvp", c.hvp, where);
  get(j, "workers", c.workers, where);
  get(j, "seed", c.seed, where);
  get(j, "probe", c.probe, where);
  get(j, "no_basis_storage", c.no_basis_storage, where);
  get(j, "point", c.point, where);
  get(j, "direction", c.direction, where);
  get(j, "blocks", c.blocks, where);
  get(j, "estimator", c.estimator, where);
  get(j, "sigma_f", c.sigma_f, where);
  get(j, "trials", c.trials, where);
  get(j, "grid_lo", c.grid_lo, where);
  get(j, "grid_hi", c.grid_hi, where);
  get(j, "grid_points", c.grid_points, where);
  get(j, "steps", c.steps, where);
  if (j.contains("profile")) c.profile = j.at("profile");
  validate(c);
  return c;
}

void validate(const RunConfig& c) {
  static const std::set<std::string> commands{"spectrum", "blockdiag", "epssweep", "cost", "optbench"};
  if (!commands.count(c.command)) throw ConfigError("config: unknown command '" + c.command + "'");
  validate(c.oracle);
  if (c.epsilon && !(*c.epsilon > 0.0 && std::isfinite(*c.epsilon))) throw ConfigError("config: epsilon must be positive");
  if (c.m == 0) throw ConfigError("config: m must be positive");
  if (c.s == 0) throw ConfigError("config: s must be positive");
  if (!kPrecisions.count(c.precision)) throw ConfigError("config: precision must be fp64, fp32 or bf16");
  if (!kPrecisions.count(c.grad_precision)) throw ConfigError("config: grad_precision must be fp64, fp32 or bf16");
  if (c.ranks == 0) throw ConfigError("config: ranks must be positive");
  if (c.workers == 0) throw ConfigError("config: workers must be positive");
  if (c.hvp != "exact" && c.hvp != "fd" && c.hvp != "sharded") throw ConfigError("config: hvp must be exact, fd or sharded");
  if (c.probe != "gaussian" && c.probe != "rademacher") throw ConfigError("config: probe must be gaussian or rademacher");
  if (c.smoothing && !(*c.smoothing > 0.0)) throw ConfigError("config: smoothing must be positive");
  if (c.reorth != "none" && c.reorth != "full" && c.reorth.rfind("window:", 0) != 0)
    throw ConfigError("config: reorth must be none, full or window:r");
  if (c.estimator != "gradient_hvp" && c.estimator != "second_difference")
    throw ConfigError("config: estimator must be gradient_hvp or second_difference");
  if (!(c.sigma_f >= 0.0)) throw ConfigError("config: sigma_f must be >= 0");
  if (c.trials == 0) throw ConfigError("config: trials must be positive");
  if (!(c.grid_lo > 0.0 && c.grid_hi > c.grid_lo) || c.grid_points < 2)
    throw ConfigError("config: need 0 < grid_lo < grid_hi and at least two grid points");
  if (c.steps == 0) throw ConfigError("config: steps must be positive");
}

}  // namespace curvkit::config
