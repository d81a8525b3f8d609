// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "curvkit/cli.hpp"
#include "curvkit/config.hpp"

namespace curvkit {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("curvkit_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

int run(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "curvkit");
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

TEST(Config, ShorthandParsing) {
  auto d = config::parse_objective("quadratic:diag1..8");
  EXPECT_EQ(d.matrix, "diag");
  EXPECT_EQ(d.dim, 8u);
  auto c = config::parse_objective("quadratic:coupled,dim=24,blocks=4,c=0.25,seed=5");
  EXPECT_EQ(c.blocks, 4u);
  EXPECT_DOUBLE_EQ(c.coupling, 0.25);
  auto r = config::parse_objective("rippled:B=0.1,omega=20,dims=1,A=2");
  EXPECT_EQ(r.dims, 1);
  EXPECT_DOUBLE_EQ(r.smooth_coeff, 2.0);
  auto m = config::parse_objective("mlp:layers=2-3-1,points=12,batches=3,seed=4");
  EXPECT_EQ(m.layers, (std::vector<std::size_t>{2, 3, 1}));
  EXPECT_THROW(config::parse_objective("cubic:dim=3"), config::ConfigError);
  EXPECT_THROW(config::parse_objective("rippled:B=0.1,bogus=1"), config::ConfigError);
}

TEST(Config, JsonRoundTripAndStrictKeys) {
  config::RunConfig cfg;
  cfg.command = "spectrum";
  cfg.oracle = config::parse_objective("quadratic:random,dim=16,seed=3");
  cfg.m = 12;
  cfg.reorth = "window:2";
  const json j = config::to_json(cfg);
  EXPECT_EQ(config::to_json(config::run_config_from_json(j)), j);
  json bad = j;
  bad["unexpected"] = 1;
  EXPECT_THROW(config::run_config_from_json(bad), config::ConfigError);
  json wrapped{{"config", j}};
  EXPECT_EQ(config::to_json(config::run_config_from_json(wrapped)), j);
}

TEST(Config, ValidateRejectsBadSettings) {
  config::RunConfig cfg;
  cfg.command = "spectrum";
  cfg.m = 0;
  EXPECT_THROW(config::validate(cfg), config::ConfigError);
  cfg.m = 10;
  cfg.reorth = "sometimes";
  EXPECT_THROW(config::validate(cfg), config::ConfigError);
}

TEST(Cli, SpectrumOfDiagonal) {
  auto dir = scratch("spectrum");
  ASSERT_EQ(run({"--out", dir.string(), "--m", "32", "--hvp", "exact", "spectrum"}), 0);
  auto j = read_json(dir / "spectrum.json");
  ASSERT_EQ(j["nodes"].size(), 32u);
  EXPECT_NEAR(j["nodes"][0].get<double>(), 1.0, 1e-8);
  EXPECT_NEAR(j["nodes"][31].get<double>(), 32.0, 1e-8);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "density.csv"));
  fs::remove_all(dir);
}

TEST(Cli, ManifestReproducesOutputs) {
  auto a = scratch("repro_a"), b = scratch("repro_b");
  ASSERT_EQ(run({"--out", a.string(), "--oracle", "quadratic:random_spd,dim=20,seed=2", "--m", "10", "--s",
                 "2", "spectrum"}),
            0);
  ASSERT_EQ(run({"--config", (a / "manifest.json").string(), "--out", b.string(), "spectrum"}), 0);
  EXPECT_EQ(read_json(a / "manifest.json")["outputs"], read_json(b / "manifest.json")["outputs"]);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, WorkedExampleThroughCost) {
  auto dir = scratch("cost");
  ASSERT_EQ(run({"--out", dir.string(), "cost"}), 0);
  auto j = read_json(dir / "cost.json");
  auto w = j["worked_example"];
  EXPECT_NEAR(w["t_dp"].get<double>(), 0.100, 1e-12);
  EXPECT_NEAR(w["t_fsdp"].get<double>(), 0.135, 1e-12);
  EXPECT_NEAR(w["relative_overhead"].get<double>(), 0.35, 1e-9);
  fs::remove_all(dir);
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  std::string err;
  EXPECT_EQ(run({"--m", "0", "spectrum"}, &err), 2);
  EXPECT_EQ(json::parse(err)["error"]["kind"], "config");
  EXPECT_EQ(run({"--oracle", "nonsense", "spectrum"}), 2);
  EXPECT_EQ(run({"--reorth", "window:-1", "spectrum"}), 2);
  EXPECT_NE(run({"frobnicate"}), 0);
}

TEST(Cli, ShardedRunReportsCollectives) {
  auto dir = scratch("sharded");
  ASSERT_EQ(run({"--out", dir.string(), "--oracle", "mlp:layers=4-8-8-1,points=32,batches=8,seed=7", "--ranks",
                 "4", "--m", "8", "--reorth", "window:3", "spectrum"}),
            0);
  auto j = read_json(dir / "spectrum.json");
  EXPECT_TRUE(j.contains("collectives"));
  fs::remove_all(dir);
}

}  // namespace
}  // namespace curvkit
