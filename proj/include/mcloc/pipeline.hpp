#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mcloc/core.hpp"
#include "mcloc/icp.hpp"
#include "mcloc/metrics.hpp"
#include "mcloc/objectives.hpp"
#include "mcloc/search.hpp"
#include "mcloc/synth.hpp"

namespace mcloc {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class RunMode { kSynthetic, kFromFiles };

struct FileInputs {
  std::filesystem::path map_path;
  std::filesystem::path scan_path;
  Pose2 truth;
};

/// One batch run: scenes (or input files), search discretization, objectives
/// and outputs. Parsed from a JSON config file; see the README for the
/// schema.
struct RunConfig {
  RunMode mode = RunMode::kSynthetic;
  SceneSpec scene;
  std::optional<DensityBias> density_bias;
  SensorSpec sensor;
  FileInputs files;
  SearchSpec search;
  std::vector<Objective> objectives = {Objective::kCount, Objective::kHelmert};
  bool icp_study = false;
  IcpParams icp;
  int epochs = 1;
  uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  int workers = 0;  // <= 0: hardware concurrency
  bool heatmaps = false;   // per-heading PGM images
  bool grid_csv = false;   // per-heading CSV dumps of the score grids
  int scan_normal_k = 20;

  void validate() const;  // throws ConfigError naming the offending field
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text, const std::string& origin);

struct ObjectiveReport {
  Objective objective = Objective::kCount;
  GridIndex best_index;
  Pose2 best_offset;  // meters / radians relative to the initial pose
  double best_value = 0.0;
  EpochMetrics metrics;
  double seconds = 0.0;
};

struct EpochReport {
  int epoch = 0;
  std::vector<ObjectiveReport> objectives;
  int icp_failed_runs = -1;  // -1 when the study was not run
  bool icp_epoch_failed = false;
  double seconds = 0.0;
  std::string error;  // non-empty when the epoch errored

  bool ok() const { return error.empty(); }
};

std::string objective_name(Objective obj);

/// Report serialization is lossless apart from the wall-clock timing fields.
std::string epoch_report_to_json(const EpochReport& report);
EpochReport epoch_report_from_json(const std::string& text);

/// One epoch's worth of inputs, generated or loaded per the config.
struct EpochData {
  MapCloud map;
  ScanCloud scan;  // sensor frame; normals filled when Helmert is requested
  Pose2 truth;
  Pose2 initial;  // search grid center (= truth in ground-truth-centered runs)
};

EpochData prepare_epoch(const RunConfig& config, int epoch);

/// Runs one epoch end to end (search per objective, metrics, optional ICP
/// study). Exceptions propagate; run_batch converts them to error reports.
EpochReport run_epoch(const RunConfig& config, int epoch);

struct BatchResult {
  std::vector<EpochReport> epochs;
  std::filesystem::path csv_path;
  int exit_code = 0;
};

/// Runs all epochs (in parallel up to config.workers), writes one JSON report
/// per epoch, optional PGM heatmaps, and the aggregate CSV. Exit code 0 iff
/// no epoch errored.
BatchResult run_batch(const RunConfig& config);

/// CSV of one convergence study (header + one line per init).
std::string study_csv(const ConvergenceStudy& study);

}  // namespace mcloc
