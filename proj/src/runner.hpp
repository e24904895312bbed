#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "metrics.hpp"
#include "scenario.hpp"

namespace iiotfwd {

struct RunManifest {
  std::string scenario_path;
  ScenarioConfig cfg;
  std::vector<Strategy> strategies;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out_dir;
  bool trace = false;
  bool full_horizon = false;
  unsigned jobs = 0;             // 0 picks the hardware concurrency
  std::uint64_t series_stride = 100;  // cycles between rows of series_mean.csv
};

/// Manifest from a scenario's [run] section.
RunManifest manifest_from(const ScenarioConfig& cfg, std::filesystem::path out_dir);

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunReport {
  std::vector<RunTotals> runs;  // strategy-major, seeds in manifest order
  std::vector<std::filesystem::path> files;
};

/// Lower-case name used in file names: pdd, pdd-cr, distrdatafwd.
std::string strategy_slug(Strategy s);

/// One CSV + summary (+ trace) per (strategy, seed), comparison.csv and
/// series_mean.csv. With a sweep key set, each value gets its own
/// subdirectory and sweep.csv / sweep_runs.csv collect the grid.
/// Throws ScenarioError for a bad manifest and IoError for unwritable output.
RunReport run_manifest(const RunManifest& manifest);

/// Runs every (strategy, seed) pair of `cfg` on `jobs` threads; results come
/// back in strategy-major order regardless of scheduling.
std::vector<Metrics> run_grid(const ScenarioConfig& cfg, const std::vector<Strategy>& strategies,
                              const std::vector<std::uint64_t>& seeds, bool trace, unsigned jobs);

void write_comparison_csv(std::ostream& os, const std::vector<RunTotals>& runs);

}  // namespace iiotfwd
