#pragma once

// Experiment runners and result bundles. A bundle is a directory holding the
// resolved config.ini, raw CSVs, failures.csv, summary.json and run.json; the
// summary is a pure function of config.ini and the CSVs.

#include "config.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace homlab::cli {

enum ExitCode : int { kSuccess = 0, kInvariantFailure = 1, kConfigError = 2, kSolverFailure = 3 };

struct RunContext {
  std::filesystem::path output_dir;
  int threads = 0;
};

/// Runs the configured experiment, writes its bundle and returns the exit code:
/// 3 if any solve failed, 1 if an invariant check failed, 0 otherwise.
int run_experiment(const Config& config, const RunContext& context);

/// Recomputes summary.json from the bundle's config.ini and CSVs.
nlohmann::json summarize_bundle(const std::filesystem::path& dir);

/// Compares bundles: prints a table to `out`, fills `json`, returns 0 if every
/// bundle passes and 1 otherwise.
int report(const std::vector<std::filesystem::path>& dirs, std::ostream& out, nlohmann::json& json);

}  // namespace homlab::cli
