// Copyright (c) 2026, The curvkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver. Each run writes its outputs plus manifest.json into
// the output directory; `--config <dir>/manifest.json` re-runs it.
//
// Exit codes: 0 success (breakdown and divergence are flagged in the JSON),
// 2 invalid configuration, 3 numerical failure. Errors are reported on
// stderr as {"error": {"kind": ..., "message": ...}}.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "curvkit/config.hpp"

namespace curvkit::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalError = 3 };

/// Raised for non-finite products and failed collectives; exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Executes a validated configuration and writes its files into `out_dir`.
/// Returns the summary JSON (also written as <command>.json).
nlohmann::json execute(const config::RunConfig& cfg, const std::filesystem::path& out_dir);

/// Cost profile used when none is supplied.
nlohmann::json default_cost_profile();

/// Full entry point; args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace curvkit::cli
