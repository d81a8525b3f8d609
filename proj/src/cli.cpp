// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "curvkit/cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>

#include "curvkit/blockdiag.hpp"
#include "curvkit/costmodel.hpp"
#include "curvkit/fdhvp.hpp"
#include "curvkit/lanczos.hpp"
#include "curvkit/numerics.hpp"
#include "curvkit/optbench.hpp"
#include "curvkit/sharded.hpp"

namespace curvkit::cli {

using nlohmann::json;
namespace fs = std::filesystem;
using config::ConfigError;
using config::RunConfig;

namespace {

constexpr const char* kVersion = "0.1.0";

// ------------------------------------------------------------------ output

class OutputSet {
 public:
  OutputSet(fs::path dir, json cfg) : dir_(std::move(dir)), cfg_(std::move(cfg)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }

  void json_file(const std::string& name, json body) {
    body["config"] = cfg_;
    write(name, body.dump(2) + "\n");
  }

  // CSV files carry the resolved config on a leading comment line.
  void csv_file(const std::string& name, const std::string& body) {
    write(name, "# config=" + cfg_.dump() + "\n" + body);
  }

  void manifest() {
    json files = json::object();
    for (const auto& [name, hash] : hashes_) files[name] = hash;
    const json m{{"tool", "curvkit"}, {"version", kVersion}, {"config", cfg_}, {"outputs", files}};
    std::ofstream os(dir_ / "manifest.json", std::ios::binary);
    os << m.dump(2) << "\n";
    if (!os) throw std::runtime_error("failed to write manifest.json");
  }

 private:
  void write(const std::string& name, const std::string& text) {
    std::ofstream os(dir_ / name, std::ios::binary);
    os << text;
    if (!os) throw std::runtime_error("failed to write " + (dir_ / name).string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << h;
    hashes_.emplace_back(name, hex.str());
  }

  fs::path dir_;
  json cfg_;
  std::vector<std::pair<std::string, std::string>> hashes_;
};

json summary_json(const blockdiag::Summary& s) { return {{"mean", s.mean}, {"std", s.std}, {"count", s.count}}; }
json metric_json(const blockdiag::MetricSummary& m) {
  return {{"rel_error", summary_json(m.rel_error)}, {"cosine", summary_json(m.cosine)}};
}

fd::FdConfig fd_config(const RunConfig& cfg, bool normalize_probe) {
  fd::FdConfig f;
  f.epsilon = cfg.epsilon.value_or(1e-4);
  f.precision = parse_precision(cfg.grad_precision);
  f.normalize_probe = normalize_probe;
  return f;
}

Vec resolve_point(const RunConfig& cfg, const Objective& obj) {
  Vec x = cfg.point.empty() ? config::default_point(cfg.oracle, obj) : cfg.point;
  if (x.size() != obj.dim())
    throw ConfigError("point has " + std::to_string(x.size()) + " entries, objective has " + std::to_string(obj.dim()));
  return x;
}

void require_exact_hvp(const Objective& obj) {
  const Vec probe(obj.dim(), 0.0);
  if (!obj.exact_hvp(probe, probe)) throw ConfigError("hvp=exact needs a closed-form Hessian (quadratic or rippled oracle)");
}

// Sharded plumbing shared by the spectrum and block commands.
struct ShardedSetup {
  std::unique_ptr<sharded::Communicator> comm;
  std::unique_ptr<sharded::ShardedOperator> op;
};

ShardedSetup make_sharded(const RunConfig& cfg, const Objective& obj, const Vec& theta) {
  if (cfg.ranks > obj.dim()) throw ConfigError("ranks exceed the parameter count");
  ShardedSetup s;
  s.comm = std::make_unique<sharded::Communicator>(cfg.ranks);
  sharded::ShardedOptions opts;
  // Lanczos already hands over unit vectors; skipping the norm all-reduce
  // keeps each iteration at 2 + r scalar collectives.
  opts.fd = fd_config(cfg, false);
  opts.schedule = cfg.workers > 1 ? sharded::Schedule::threaded : sharded::Schedule::sequential;
  s.op = std::make_unique<sharded::ShardedOperator>(obj, theta, sharded::partition(obj.dim(), cfg.ranks),
                                                    sharded::round_robin(obj.batch_count(), cfg.ranks), *s.comm,
                                                    opts);
  return s;
}

// ---------------------------------------------------------------- spectrum

json cmd_spectrum(const RunConfig& cfg, OutputSet& out) {
  const ObjectivePtr obj = config::build_objective(cfg.oracle);
  const Vec theta = resolve_point(cfg, *obj);
  krylov::SlqConfig slq;
  slq.lanczos.m = cfg.m;
  try {
    slq.lanczos.reorth = krylov::ReorthPolicy::parse(cfg.reorth);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  slq.lanczos.storage = parse_precision(cfg.precision);
  slq.lanczos.no_basis_storage = cfg.no_basis_storage;
  slq.probes = cfg.s;
  slq.distribution = cfg.probe == "rademacher" ? krylov::ProbeDistribution::rademacher : krylov::ProbeDistribution::gaussian;
  slq.smoothing_sigma = cfg.smoothing;
  slq.seed = cfg.seed;

  std::unique_ptr<krylov::LinearOperator> op;
  ShardedSetup sh;
  std::uint64_t max_scalar = 0, last = 0;
  if (cfg.hvp == "exact") {
    require_exact_hvp(*obj);
    op = std::make_unique<krylov::ExactHvpOperator>(*obj, theta);
  } else if (cfg.hvp == "fd") {
    op = std::make_unique<krylov::FdHvpOperator>(*obj, theta, fd_config(cfg, true));
  } else {
    sh = make_sharded(cfg, *obj, theta);
    op = std::make_unique<krylov::ShardedHvpOperator>(*sh.op);
    // Scalar all-reduces between consecutive iteration starts.
    slq.lanczos.on_iteration = [&](std::size_t k) {
      const std::uint64_t now = sh.comm->counters().allreduce_scalar;
      if (k > 0) max_scalar = std::max(max_scalar, now - last);
      last = now;
    };
  }

  const krylov::SpectralDensity d = krylov::slq_density(*op, slq);

  json probes = json::array();
  for (const auto& run : d.runs) {
    const auto tol = krylov::default_ghost_tol(run.ritz.values, slq.lanczos.storage);
    const auto ghosts = krylov::ghost_detect(run.ritz, tol);
    json clusters = json::array();
    for (const auto& c : ghosts.clusters)
      clusters.push_back({{"center", c.center}, {"splitting", c.splitting}, {"count", c.values.size()}, {"weight_sum", c.weight_sum}});
    probes.push_back({{"steps", run.steps},
                      {"breakdown", run.breakdown},
                      {"eta_bar", run.eta_bar},
                      {"ritz_values", run.ritz.values},
                      {"weights", run.ritz.weights},
                      {"ghosts", {{"tol", tol}, {"clusters", clusters}}}});
  }
  const auto [lo, hi] = d.support();
  json body{{"dim", obj->dim()},
            {"nodes", d.nodes},
            {"weights", d.weights},
            {"trace_estimate", d.trace_estimate()},
            {"sigma", d.sigma},
            {"support", {lo, hi}},
            {"breakdown", d.breakdown},
            {"probes", probes}};
  if (sh.comm) {
    const auto audit = sharded::collective_audit(*sh.comm, 2);
    const auto& c = audit.counters;
    const std::size_t r = slq.lanczos.reorth.kind == krylov::ReorthPolicy::Kind::full ? cfg.m : slq.lanczos.reorth.window;
    body["collectives"] = {{"allreduce_scalar", c.allreduce_scalar},
                           {"reduce_scatter_stub", c.reduce_scatter_stub},
                           {"allgather_stub", c.allgather_stub},
                           {"extra_parameter_sized", c.extra_parameter_sized},
                           {"gradient_passes", c.gradient_passes},
                           {"no_extra_parameter_collectives", audit.no_extra_parameter_collectives},
                           {"max_allreduce_per_iteration", max_scalar},
                           {"allreduce_bound", 2 + r}};
  }
  out.csv_file("stem.csv", krylov::stem_csv(d));
  out.csv_file("density.csv", krylov::density_csv(d));
  return body;
}

// --------------------------------------------------------------- blockdiag

json cmd_blockdiag(const RunConfig& cfg, OutputSet& out) {
  const ObjectivePtr obj = config::build_objective(cfg.oracle);
  const Vec theta = resolve_point(cfg, *obj);
  blockdiag::BlockPartition partition(config::default_blocks(cfg.oracle, *obj, cfg.blocks));
  blockdiag::HvpFn fn;
  ShardedSetup sh;
  double eps = 0.0;
  if (cfg.hvp == "exact") {
    require_exact_hvp(*obj);
    fn = blockdiag::exact_hvp_fn(*obj, theta);
  } else if (cfg.hvp == "fd") {
    fn = blockdiag::fd_hvp_fn(*obj, theta, fd_config(cfg, true));
    eps = *cfg.epsilon;
  } else {
    sh = make_sharded(cfg, *obj, theta);
    fn = blockdiag::sharded_hvp_fn(*sh.op);
    eps = *cfg.epsilon;
  }
  blockdiag::BlockDiagConfig bc;
  bc.probes = cfg.s;
  bc.seed = cfg.seed;
  bc.epsilon = eps;
  const auto stats = blockdiag::block_diag_test(obj->dim(), fn, partition, bc);
  json per_block = json::array();
  for (std::size_t b = 0; b < stats.per_block.size(); ++b) {
    json e = metric_json(stats.per_block[b]);
    e["block"] = b;
    e["begin"] = partition.begin(b);
    e["end"] = partition.end(b);
    per_block.push_back(e);
  }
  out.csv_file("blockdiag.csv", blockdiag::block_csv(stats));
  return {{"dim", obj->dim()},
          {"blocks", stats.blocks},
          {"boundaries", partition.boundaries()},
          {"probes", stats.probes},
          {"epsilon", stats.epsilon},
          {"degenerate", stats.degenerate},
          {"joint", metric_json(stats.joint)},
          {"over_blocks", metric_json(stats.over_blocks)},
          {"over_probes", metric_json(stats.over_probes)},
          {"per_block", per_block}};
}

// ---------------------------------------------------------------- epssweep

json cmd_epssweep(const RunConfig& cfg, OutputSet& out) {
  const ObjectivePtr obj = config::build_objective(cfg.oracle);
  const Vec theta = resolve_point(cfg, *obj);
  Vec v = cfg.direction.empty() ? Vec(obj->dim(), 1.0) : cfg.direction;
  if (v.size() != obj->dim()) throw ConfigError("direction length differs from the objective dimension");
  const double vn = norm2(v);
  if (!(vn > 0.0)) throw ConfigError("direction must be nonzero");
  for (double& x : v) x /= vn;

  fd::SweepConfig sc;
  sc.estimator = cfg.estimator == "second_difference" ? fd::Estimator::second_difference : fd::Estimator::gradient_hvp;
  sc.precision = parse_precision(cfg.precision);
  sc.sigma_f = cfg.sigma_f;
  sc.trials = cfg.trials;
  sc.seed = cfg.seed;
  const Vec grid = numerics::logspace(cfg.grid_lo, cfg.grid_hi, cfg.grid_points);
  const auto points = fd::fd_error_sweep(*obj, theta, v, grid, sc);

  fd::NoiseModel nm;
  nm.sigma_f = cfg.sigma_f;
  nm.grad_norm = norm2(obj->gradient(theta));
  if (auto g3 = obj->exact_third_gradient(theta, v)) nm.d3_grad_norm = norm2(*g3);
  if (auto d4 = obj->exact_fourth_directional(theta, v)) nm.d4_norm = std::abs(*d4);
  std::optional<fd::StepEstimate> predicted;
  if (sc.estimator == fd::Estimator::gradient_hvp && obj->exact_third_gradient(theta, v))
    predicted = fd::optimal_epsilon(nm, machine_epsilon(sc.precision));
  else if (sc.estimator == fd::Estimator::second_difference && cfg.sigma_f > 0.0 && nm.d4_norm > 0.0)
    predicted = fd::optimal_epsilon_function_noise(nm);
  const auto summary = fd::summarize_sweep(points, predicted ? std::optional(predicted->epsilon) : std::nullopt);

  json pts = json::array();
  for (const auto& p : points) pts.push_back({{"epsilon", p.epsilon}, {"abs_error", p.abs_error}, {"rel_error", p.rel_error}});
  auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
  out.csv_file("sweep.csv", fd::sweep_csv(points, sc));
  return {{"points", pts},
          {"empirical_minimizer", summary.empirical_minimizer},
          {"min_error", summary.min_error},
          {"slope_above", opt(summary.slope_above)},
          {"slope_below", opt(summary.slope_below)},
          {"predicted_epsilon", opt(summary.predicted_epsilon)},
          {"predicted_fallback", predicted ? predicted->fallback : false}};
}

// -------------------------------------------------------------------- cost

double num(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(std::string("profile: '") + key + "' must be a number");
  return j.at(key).get<double>();
}

template <class T>
std::vector<T> list(const json& j, const char* key, std::vector<T> fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<std::vector<T>>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("profile: '") + key + "' must be a list of numbers");
  }
}

void check_profile_keys(const json& j, std::initializer_list<const char*> keys, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string("profile: ") + where + " must be an object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* a : keys) ok = ok || k == a;
    if (!ok) throw ConfigError(std::string("profile: unknown key '") + k + "' in " + where);
  }
}

json cmd_cost(const RunConfig& cfg, OutputSet& out) {
  const json& prof = cfg.profile;
  check_profile_keys(prof, {"name", "params", "grid", "t_post", "dp_fsdp", "worked_example"}, "profile");
  const json params = prof.value("params", json::object());
  check_profile_keys(params,
                     {"alpha", "beta", "gamma", "f_fwd", "f_bwd", "g_grad", "v_grad", "p", "t_scalar", "c0", "c1", "k_vec"},
                     "params");
  cost::CostParams base;
  base.alpha = num(params, "alpha", 0.0);
  base.beta = num(params, "beta", 0.0);
  base.gamma = num(params, "gamma", 0.0);
  base.f_fwd = num(params, "f_fwd", 0.0);
  base.f_bwd = num(params, "f_bwd", 0.0);
  base.g_grad = num(params, "g_grad", 0.0);
  base.v_grad = num(params, "v_grad", 0.0);
  base.p = num(params, "p", 0.0);
  base.t_scalar = num(params, "t_scalar", 0.0);
  base.c0 = num(params, "c0", 0.0);
  base.c1 = num(params, "c1", 0.0);
  base.k_vec = num(params, "k_vec", 5.0);
  const json grid = prof.value("grid", json::object());
  check_profile_keys(grid, {"ranks", "windows", "probes", "m"}, "grid");
  const auto ranks = list<double>(grid, "ranks", {1, 2, 4, 8});
  const auto windows = list<std::size_t>(grid, "windows", {0, 3, 5});
  const auto probes = list<std::size_t>(grid, "probes", {cfg.s});
  const auto ms = list<std::size_t>(grid, "m", {cfg.m});
  const double t_post = num(prof, "t_post", 0.0);

  json rows = json::array();
  std::ostringstream csv;
  csv << std::setprecision(17) << "R,r,s,m,t_grad,t_vec,t_hvp,t_lanczos_iter,t_slq,post_fraction\n";
  try {
    for (double r : ranks) {
      cost::CostParams p = base;
      p.r = r;
      p.validate();
      for (auto w : windows)
        for (auto s : probes)
          for (auto m : ms) {
            const auto slq = cost::t_slq(p, s, m, w, t_post);
            const json row{{"R", r},           {"r", w},
                           {"s", s},           {"m", m},
                           {"t_grad", cost::t_grad(p)},
                           {"t_vec", cost::t_vec(p)},
                           {"t_hvp", cost::t_hvp(p)},
                           {"t_lanczos_iter", cost::t_lanczos_iter(p, w)},
                           {"t_slq", slq.total},
                           {"post_fraction", slq.post_fraction}};
            rows.push_back(row);
            csv << r << ',' << w << ',' << s << ',' << m << ',' << cost::t_grad(p) << ',' << cost::t_vec(p) << ','
                << cost::t_hvp(p) << ',' << cost::t_lanczos_iter(p, w) << ',' << slq.total << ','
                << slq.post_fraction << '\n';
          }
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  json body{{"table", rows}};
  auto dp_json = [](const cost::DpFsdp& d) {
    return json{{"t_dp", d.t_dp}, {"t_fsdp", d.t_fsdp}, {"delta", d.delta}, {"difference", d.difference}, {"relative_overhead", d.relative_overhead}};
  };
  try {
    if (prof.contains("dp_fsdp")) {
      const json& d = prof.at("dp_fsdp");
      check_profile_keys(d, {"c", "k", "p", "l", "alpha", "beta"}, "dp_fsdp");
      body["dp_fsdp"] = dp_json(cost::dp_vs_fsdp(num(d, "c", 0), num(d, "k", 1), num(d, "p", 0), num(d, "l", 1),
                                                 num(d, "alpha", 0), num(d, "beta", 0)));
    }
    if (prof.contains("worked_example")) {
      const json& w = prof.at("worked_example");
      check_profile_keys(w, {"t_comp", "dp_comm", "fsdp_comm", "k", "l", "p"}, "worked_example");
      const double dp = num(w, "dp_comm", 0), fs = num(w, "fsdp_comm", 0);
      json e = dp_json(cost::dp_vs_fsdp_from_times(num(w, "t_comp", 0), dp, fs));
      // Whether the quoted communication times are reachable by the closed
      // form with nonnegative (alpha, beta).
      const auto cal = cost::calibrate_to_comm_times(dp, fs, num(w, "k", 8), num(w, "l", 32), num(w, "p", 1));
      e["closed_form_feasible"] = cal.has_value();
      if (cal) e["calibration"] = {{"alpha", cal->alpha}, {"beta", cal->beta}};
      body["worked_example"] = e;
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  out.csv_file("cost.csv", csv.str());
  return body;
}

// ---------------------------------------------------------------- optbench

json traj_summary(const opt::Trajectory& t) {
  const double f = t.final_loss();
  return {{"final_loss", std::isfinite(f) ? json(f) : json(nullptr)},
          {"diverged", t.diverged},
          {"diverged_at", t.diverged_at},
          {"iterations", t.iterates.empty() ? 0 : t.iterates.size() - 1},
          {"final_point", t.iterates.empty() ? Vec{} : t.iterates.back()}};
}

json cmd_optbench(const RunConfig& cfg, OutputSet& out) {
  if (cfg.oracle.kind != "rippled" || cfg.oracle.dims != 2) throw ConfigError("optbench needs the 2D rippled oracle");
  const ObjectivePtr obj = config::build_objective(cfg.oracle);
  const auto& surface = dynamic_cast<const RippledObjective&>(*obj);
  const Vec start = cfg.point.empty() ? Vec{2.0, 2.0} : cfg.point;
  if (start.size() != 2) throw ConfigError("optbench start point must have two entries");

  json methods = json::object();
  const Vec grid = opt::default_lr_grid();
  for (auto m : {opt::Method::gd, opt::Method::momentum, opt::Method::adam}) {
    opt::OptimizerConfig oc;
    oc.method = m;
    oc.steps = cfg.steps;
    oc.start = start;
    const auto res = opt::grid_search_lr(surface, oc, grid);
    json fl = json::array();
    for (double f : res.final_losses) fl.push_back(std::isfinite(f) ? json(f) : json(nullptr));
    json e = traj_summary(res.best);
    e["best_lr"] = res.best_lr;
    e["lrs"] = res.lrs;
    e["final_losses"] = fl;
    methods[opt::to_string(m)] = e;
    out.csv_file("trajectory_" + opt::to_string(m) + ".csv", opt::trajectory_csv(res.best));
  }

  json nesterov = json::object();
  double finals[2] = {0.0, 0.0};
  int idx = 0;
  for (auto mode : {opt::CurvatureMode::pointwise, opt::CurvatureMode::fd_averaged}) {
    opt::NesterovConfig nc;
    nc.mode = mode;
    nc.epsilon = *cfg.epsilon;
    nc.steps = cfg.steps;
    nc.start = start;
    const auto t = opt::adaptive_nesterov(surface, nc);
    const std::string name = mode == opt::CurvatureMode::pointwise ? "pointwise" : "fd_averaged";
    nesterov[name] = traj_summary(t);
    finals[idx++] = t.final_loss();
    out.csv_file("trajectory_nesterov_" + name + ".csv", opt::trajectory_csv(t));
  }
  const double ratio = std::max(finals[0], finals[1]) / std::max(std::min(finals[0], finals[1]), 1e-300);
  nesterov["loss_ratio"] = std::isfinite(ratio) ? json(ratio) : json(nullptr);
  nesterov["lower_final_loss"] = finals[0] <= finals[1] ? "pointwise" : "fd_averaged";
  return {{"global_minimum", opt::rippled_minimum(surface)},
          {"start", start},
          {"steps", cfg.steps},
          {"methods", methods},
          {"nesterov", nesterov}};
}

RunConfig resolve(RunConfig cfg) {
  if (!cfg.epsilon) {
    if (cfg.command == "optbench") cfg.epsilon = 2.0 * std::numbers::pi / cfg.oracle.frequency;
    else if (cfg.command == "spectrum" || cfg.command == "blockdiag") cfg.epsilon = 1e-4;
  }
  if (cfg.command == "cost" && cfg.profile.is_null()) cfg.profile = default_cost_profile();
  return cfg;
}

void error_json(std::ostream& err, const std::string& kind, const std::string& message) {
  err << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace

json default_cost_profile() {
  return {{"name", "desk"},
          {"params",
           {{"alpha", 5e-6},
            {"beta", 1e-10},
            {"gamma", 1e-12},
            {"f_fwd", 2e12},
            {"f_bwd", 4e12},
            {"g_grad", 96},
            {"v_grad", 3e9},
            {"p", 1e9},
            {"t_scalar", 1e-5},
            {"c0", 6},
            {"c1", 2},
            {"k_vec", 5}}},
          {"grid", {{"ranks", {1, 2, 4, 8}}, {"windows", {0, 3, 5}}, {"probes", {1, 8}}, {"m", {30, 100}}}},
          {"t_post", 0.0},
          {"worked_example", {{"t_comp", 0.080}, {"dp_comm", 0.020}, {"fsdp_comm", 0.055}, {"k", 8}, {"l", 32}, {"p", 1}}}};
}

json execute(const RunConfig& in, const fs::path& out_dir) {
  config::validate(in);
  const RunConfig cfg = resolve(in);
  OutputSet out(out_dir, config::to_json(cfg));
  json body;
  try {
    if (cfg.command == "spectrum") body = cmd_spectrum(cfg, out);
    else if (cfg.command == "blockdiag") body = cmd_blockdiag(cfg, out);
    else if (cfg.command == "epssweep") body = cmd_epssweep(cfg, out);
    else if (cfg.command == "cost") body = cmd_cost(cfg, out);
    else body = cmd_optbench(cfg, out);
  } catch (const NonFiniteGradient& e) {
    throw NumericalError(e.what());
  } catch (const sharded::CollectiveError& e) {
    throw NumericalError(e.what());
  }
  body["command"] = cfg.command;
  out.json_file(cfg.command + ".json", body);
  out.manifest();
  return body;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"curvkit: matrix-free curvature diagnostics"};
  app.set_version_flag("--version", kVersion);
  app.fallthrough();
  app.require_subcommand(0, 1);

  std::string config_path, oracle, reorth, precision, grad_precision, hvp, probe, estimator, profile_path, out_dir = "curvkit_out";
  double epsilon = 0, smoothing = 0, subsample = 1, sigma_f = 0, grid_lo = 0, grid_hi = 0;
  std::size_t m = 0, s = 0, ranks = 0, workers = 0, blocks = 0, trials = 0, grid_points = 0, steps = 0;
  std::uint64_t seed = 0;
  std::vector<double> point, direction;
  bool no_basis = false;

  app.add_option("--config", config_path, "Re-run a manifest.json (or a bare config JSON)");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  auto* o_oracle = app.add_option("--oracle", oracle, "Objective shorthand, e.g. quadratic:diag1..32");
  auto* o_eps = app.add_option("--epsilon", epsilon, "Finite-difference step");
  auto* o_m = app.add_option("--m", m, "Lanczos steps");
  auto* o_s = app.add_option("--s", s, "Probe vectors");
  auto* o_reorth = app.add_option("--reorth", reorth, "none | window:r | full");
  auto* o_prec = app.add_option("--precision", precision, "Basis storage (spectrum) or gradient emulation (epssweep)");
  auto* o_gprec = app.add_option("--grad-precision", grad_precision, "Gradient rounding inside FD products");
  auto* o_ranks = app.add_option("--ranks", ranks, "Simulated ranks for the sharded product");
  auto* o_sub = app.add_option("--subsample", subsample, "Fraction of the MLP dataset used");
  auto* o_hvp = app.add_option("--hvp", hvp, "exact | fd | sharded");
  auto* o_workers = app.add_option("--workers", workers, "Worker threads for simulated ranks");
  auto* o_seed = app.add_option("--seed", seed, "Probe seed");
  auto* o_probe = app.add_option("--probe", probe, "gaussian | rademacher");
  auto* o_smooth = app.add_option("--smoothing", smoothing, "Gaussian smoothing width of the density");
  auto* o_nb = app.add_flag("--no-basis-storage", no_basis, "Keep only two Lanczos vectors");
  auto* o_point = app.add_option("--point", point, "Evaluation point / optimizer start")->delimiter(',');
  auto* o_dir = app.add_option("--direction", direction, "Sweep direction")->delimiter(',');
  auto* o_blocks = app.add_option("--blocks", blocks, "Equal blocks for the block test (0: natural blocks)");
  auto* o_est = app.add_option("--estimator", estimator, "gradient_hvp | second_difference");
  auto* o_sig = app.add_option("--sigma-f", sigma_f, "Injected function noise");
  auto* o_trials = app.add_option("--trials", trials, "Noise draws per sweep point");
  auto* o_glo = app.add_option("--grid-lo", grid_lo, "Smallest swept epsilon");
  auto* o_ghi = app.add_option("--grid-hi", grid_hi, "Largest swept epsilon");
  auto* o_gn = app.add_option("--grid-points", grid_points, "Number of swept epsilons");
  auto* o_steps = app.add_option("--steps", steps, "Optimizer steps");
  auto* o_prof = app.add_option("--profile", profile_path, "Cost profile JSON");

  const char* commands[][2] = {{"spectrum", "SLQ spectral density"},
                               {"blockdiag", "Block-diagonal Hessian test"},
                               {"epssweep", "Finite-difference error vs step"},
                               {"cost", "Cost-model tables"},
                               {"optbench", "Optimizers on the rippled surface"}};
  for (const auto& c : commands) app.add_subcommand(c[0], c[1]);

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    error_json(err, "config", e.what());
    return kConfigError;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = config::run_config_from_json(read_json_file(config_path));
    if (!app.get_subcommands().empty()) cfg.command = app.get_subcommands().front()->get_name();
    if (cfg.command.empty()) throw ConfigError("no command given (spectrum, blockdiag, epssweep, cost, optbench)");

    if (*o_oracle) cfg.oracle = config::parse_objective(oracle);
    else if (config_path.empty()) {
      if (cfg.command == "optbench") cfg.oracle = config::parse_objective("rippled:B=0.05,omega=40,dims=2");
      else if (cfg.command == "epssweep") cfg.oracle = config::parse_objective("rippled:B=0.05,omega=40,dims=1");
      else if (cfg.command == "blockdiag") cfg.oracle = config::parse_objective("mlp:layers=4-8-8-1");
      else cfg.oracle = config::parse_objective("quadratic:diag1..32");
    }
    if (*o_sub) cfg.oracle.subsample = subsample;
    if (*o_eps) cfg.epsilon = epsilon;
    if (*o_m) cfg.m = m;
    if (*o_s) cfg.s = s;
    else if (config_path.empty() && cfg.command == "blockdiag") cfg.s = 10;
    if (*o_reorth) cfg.reorth = reorth;
    if (*o_prec) cfg.precision = precision;
    if (*o_gprec) cfg.grad_precision = grad_precision;
    if (*o_ranks) cfg.ranks = ranks;
    if (*o_hvp) cfg.hvp = hvp;
    else if (config_path.empty() && *o_ranks && ranks > 1) cfg.hvp = "sharded";
    if (*o_workers) cfg.workers = workers;
    if (*o_seed) cfg.seed = seed;
    if (*o_probe) cfg.probe = probe;
    if (*o_smooth) cfg.smoothing = smoothing;
    if (*o_nb) cfg.no_basis_storage = no_basis;
    if (*o_point) cfg.point = point;
    if (*o_dir) cfg.direction = direction;
    if (*o_blocks) cfg.blocks = blocks;
    if (*o_est) cfg.estimator = estimator;
    if (*o_sig) cfg.sigma_f = sigma_f;
    if (*o_trials) cfg.trials = trials;
    if (*o_glo) cfg.grid_lo = grid_lo;
    if (*o_ghi) cfg.grid_hi = grid_hi;
    if (*o_gn) cfg.grid_points = grid_points;
    if (*o_steps) cfg.steps = steps;
    if (*o_prof) cfg.profile = read_json_file(profile_path);

    const json body = execute(cfg, out_dir);
    out << json{{"command", cfg.command}, {"out", out_dir}}.dump() << "\n";
    (void)body;
    return kOk;
  } catch (const ConfigError& e) {
    error_json(err, "config", e.what());
    return kConfigError;
  } catch (const NumericalError& e) {
    error_json(err, "numerical", e.what());
    return kNumericalError;
  } catch (const std::invalid_argument& e) {
    error_json(err, "config", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    error_json(err, "numerical", e.what());
    return kNumericalError;
  }
}

}  // namespace curvkit::cli
