#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "legiteam/experiment.hpp"

namespace legiteam {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Output file layout under one run directory.
struct CliPaths {
  std::string out_dir = "out";

  std::string csv_path() const { return out_dir + "/episodes.csv"; }
  std::string summary_path() const { return out_dir + "/summary.txt"; }
  std::string manifest_path() const { return out_dir + "/manifest.json"; }
  std::string scenarios_path() const { return out_dir + "/scenarios.txt"; }
  std::string cache_dir() const { return out_dir + "/cache"; }
  std::string pursuit_cache_path(int grid) const;
  std::string foraging_cache_path(int grid) const;
  std::string report_path(const std::string& metric) const;
};

struct CliConfig {
  ExperimentConfig experiment;
  std::string out_dir = "out";
};

/// Config file: a JSON object with keys environment, grid_sizes, episodes,
/// master_seed, beta, gamma, step_limit, conditions, solve_tol,
/// allow_large_pursuit, output. Unknown keys are rejected.
CliConfig config_from_json_text(const std::string& text);
CliConfig load_config_file(const std::string& path);

/// Per-episode CSV: header row, one data row per episode, the inference
/// column ';'-joined. Byte-deterministic for a given dataset.
std::string dataset_csv(const ExperimentDataset& dataset);
/// Inverse of dataset_csv for the report path. Parse errors carry 1-based
/// line numbers.
std::vector<EpisodeRecord> parse_dataset_csv(const std::string& text);

std::string summary_text(const ExperimentConfig& config, const StatReport& report);
/// Plot-data tables keyed by metric; columns exactly
/// grid,condition,mean,se,U,p,sig with '*' marking p < 0.05.
std::map<std::string, std::string> report_tables(const StatReport& report);
std::string manifest_json_text(const ExperimentDataset& dataset, const CliPaths& paths);
std::string scenarios_text(const ExperimentConfig& config);

std::uint64_t fnv1a64(const void* data, std::size_t size);

/// Binary policy caches: magic, format version, kind, parameter hash,
/// payload, trailing payload checksum. Readers reject wrong parameters
/// (stale) and corrupted payloads separately.
std::uint64_t pursuit_param_hash(int grid, double gamma, double solve_tol);
void write_pursuit_cache(const std::string& path, const PursuitModel& model, std::uint64_t param_hash);
PursuitModel read_pursuit_cache(const std::string& path, std::uint64_t expected_hash);

/// One cached foraging policy pair: the scheduled goal's legible policy and
/// the joint-optimal policy under the present mask reached by following the
/// capture sequence.
struct ForagingPolicyEntry {
  int scenario_id = 0;
  std::uint32_t present_mask = 0;
  int goal = 0;
  std::vector<int> legible;
  std::vector<int> joint_greedy;
};

std::uint64_t foraging_param_hash(int grid, const ExperimentConfig& config);
void write_foraging_cache(const std::string& path, const std::vector<ForagingPolicyEntry>& entries,
                          std::uint64_t param_hash);
std::vector<ForagingPolicyEntry> read_foraging_cache(const std::string& path, std::uint64_t expected_hash);

int cmd_solve(const CliConfig& config);
int cmd_run(const CliConfig& config);
int cmd_report(const std::string& dataset_path, const std::string& out_dir);

/// Entry point behind main: subcommands solve | run | report with config
/// file plus flag overrides. Returns the process exit code: 0 success,
/// 2 configuration errors, 3 I/O errors, 1 unexpected failures.
int run_cli(int argc, const char* const* argv);

}  // namespace legiteam
