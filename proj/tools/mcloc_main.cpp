#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mcloc/io.hpp"
#include "mcloc/pipeline.hpp"

namespace {

using namespace mcloc;

int cmd_run(const std::string& config_path, const std::string& out_dir,
            int workers, int64_t seed, int epochs) {
  RunConfig config = load_run_config(config_path);
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (workers > 0) config.workers = workers;
  if (seed >= 0) config.seed = static_cast<uint64_t>(seed);
  if (epochs > 0) config.epochs = epochs;

  const BatchResult batch = run_batch(config);
  int failed = 0;
  for (const auto& report : batch.epochs) {
    if (!report.ok()) {
      ++failed;
      std::cerr << "epoch " << report.epoch << " failed: " << report.error
                << "\n";
    }
  }
  std::cout << batch.epochs.size() - failed << "/" << batch.epochs.size()
            << " epochs ok, results in " << config.output_dir.string() << "\n";
  return batch.exit_code;
}

int cmd_gen(const std::string& scene_name, const std::string& out_dir,
            uint64_t seed, double width, double length, double height,
            double spacing, double protrusions, const std::string& side) {
  SceneSpec scene;
  scene.layout = scene_name == "crossing" ? Layout::kCrossing : Layout::kCorridor;
  scene.street_width = width;
  scene.length = length;
  scene.facade_height = height;
  scene.map_spacing = spacing;
  scene.protrusion_density = protrusions;
  if (side == "positive") scene.protrusion_side = ProtrusionSide::kPositiveOnly;
  if (side == "negative") scene.protrusion_side = ProtrusionSide::kNegativeOnly;
  scene.seed = seed;

  std::filesystem::create_directories(out_dir);
  const MapCloud map = generate_map(scene);
  const Pose2 truth = Pose2::identity();
  const ScanCloud scan = simulate_scan(scene, truth, SensorSpec{}, seed + 1);

  const auto dir = std::filesystem::path(out_dir);
  save_cloud(dir / "map.xyz", map.points, map.normals);
  save_cloud(dir / "scan.xyz", scan.points);
  std::string meta = "{\n  \"truth\": [0, 0, 0],\n  \"map\": \"map.xyz\",\n"
                     "  \"scan\": \"scan.xyz\"\n}\n";
  write_file_atomic(dir / "scene.json", meta);
  std::cout << "map: " << map.points.size() << " points, scan: "
            << scan.points.size() << " points -> " << out_dir << "\n";
  return 0;
}

int cmd_icp_study(const std::string& config_path, const std::string& out_csv,
                  int epoch) {
  RunConfig config = load_run_config(config_path);
  const EpochData data = prepare_epoch(config, epoch);
  const VoxelIndex index(data.map.points, 0.75);
  const ConvergenceStudy study =
      grid_convergence_study(data.scan, data.map, index, data.truth, config.icp);
  write_file_atomic(out_csv, study_csv(study));
  int failed = 0;
  for (const auto& run : study.runs) {
    if (!run.result.reached_truth) ++failed;
  }
  std::cout << "epoch " << epoch << ": " << failed << "/25 inits failed, "
            << (study.epoch_failed ? "epoch FAILED" : "epoch ok") << ", table in "
            << out_csv << "\n";
  return 0;
}

int cmd_inspect(const std::string& report_path) {
  std::ifstream in(report_path);
  if (!in) {
    std::cerr << "cannot open " << report_path << "\n";
    return 1;
  }
  std::stringstream buf;
  buf << in.rdbuf();
  const EpochReport report = epoch_report_from_json(buf.str());

  std::printf("epoch %d%s\n", report.epoch,
              report.ok() ? "" : (" ERROR: " + report.error).c_str());
  for (const auto& o : report.objectives) {
    std::printf("  %-8s best cell (%d, %d) heading %d  offset (%.3f, %.3f) m"
                "  value %.6g\n",
                objective_name(o.objective).c_str(), o.best_index.i,
                o.best_index.j, o.best_index.h, o.best_offset.tx,
                o.best_offset.ty, o.best_value);
    auto show = [](const char* name, const std::optional<double>& v) {
      if (v) {
        std::printf("    %-14s %.6g\n", name, *v);
      } else {
        std::printf("    %-14s n/a\n", name);
      }
    };
    show("peak_ratio", o.metrics.peak_ratio);
    show("kurtosis", o.metrics.kurtosis);
    show("kl_divergence", o.metrics.kl_divergence);
    if (o.metrics.plateau_distance) {
      std::printf("    %-14s %d cells\n", "plateau", *o.metrics.plateau_distance);
    } else {
      std::printf("    %-14s n/a\n", "plateau");
    }
  }
  if (report.icp_failed_runs >= 0) {
    std::printf("  icp study: %d/25 inits failed (%s)\n", report.icp_failed_runs,
                report.icp_epoch_failed ? "epoch failed" : "epoch ok");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximum consensus LiDAR localization on a pose grid"};
  app.require_subcommand(1);

  std::string config_path, out_dir, report_path, out_csv = "study.csv";
  std::string scene_name = "corridor", side = "both";
  int workers = 0, epochs = -1, epoch = 0;
  int64_t seed = -1;
  uint64_t gen_seed = 0;
  double width = 12.0, length = 100.0, height = 6.0, spacing = 0.12;
  double protrusions = 0.0;

  auto* run = app.add_subcommand("run", "Run a batch of localization epochs");
  run->add_option("-c,--config", config_path, "JSON config file")->required();
  run->add_option("-o,--out", out_dir, "Output directory (overrides config)");
  run->add_option("-w,--workers", workers, "Parallel epoch workers");
  run->add_option("-s,--seed", seed, "Base seed (overrides config)");
  run->add_option("-e,--epochs", epochs, "Epoch count (overrides config)");

  auto* gen = app.add_subcommand("gen", "Write synthetic scene files");
  gen->add_option("--scene", scene_name, "corridor or crossing");
  gen->add_option("-o,--out", out_dir, "Output directory")->required();
  gen->add_option("-s,--seed", gen_seed, "Scene seed");
  gen->add_option("--width", width, "Street width (m)");
  gen->add_option("--length", length, "Scene length (m)");
  gen->add_option("--height", height, "Facade height (m)");
  gen->add_option("--spacing", spacing, "Map point spacing (m)");
  gen->add_option("--protrusions", protrusions, "Protrusions per 10 m");
  gen->add_option("--protrusion-side", side, "both, positive or negative");

  auto* study = app.add_subcommand("icp-study", "5x5 ICP convergence study");
  study->add_option("-c,--config", config_path, "JSON config file")->required();
  study->add_option("-o,--out", out_csv, "Output CSV path");
  study->add_option("-e,--epoch", epoch, "Epoch index to study");

  auto* inspect = app.add_subcommand("inspect", "Print one epoch report");
  inspect->add_option("report", report_path, "epoch_*.json file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, workers, seed, epochs);
    if (gen->parsed()) {
      return cmd_gen(scene_name, out_dir, gen_seed, width, length, height,
                     spacing, protrusions, side);
    }
    if (study->parsed()) return cmd_icp_study(config_path, out_csv, epoch);
    if (inspect->parsed()) return cmd_inspect(report_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
