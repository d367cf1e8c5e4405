#include "mcloc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mcloc/io.hpp"
#include "mcloc/parallel.hpp"

namespace mcloc {

using nlohmann::json;

namespace {

uint64_t mix_seed(uint64_t base, uint64_t epoch, uint64_t salt) {
  uint64_t x = base ^ (epoch * 0x9e3779b97f4a7c15ULL) ^ (salt << 32);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key +
                      "' has the wrong type");
  }
}

Layout parse_layout(const std::string& s) {
  if (s == "corridor") return Layout::kCorridor;
  if (s == "crossing") return Layout::kCrossing;
  if (s == "custom") return Layout::kCustom;
  throw ConfigError("scene.layout: unknown layout '" + s + "'");
}

ProtrusionSide parse_side(const std::string& s) {
  if (s == "both") return ProtrusionSide::kBoth;
  if (s == "positive") return ProtrusionSide::kPositiveOnly;
  if (s == "negative") return ProtrusionSide::kNegativeOnly;
  throw ConfigError("scene.protrusion_side: unknown value '" + s + "'");
}

Objective parse_objective(const std::string& s) {
  if (s == "count") return Objective::kCount;
  if (s == "helmert") return Objective::kHelmert;
  throw ConfigError("objectives: unknown objective '" + s + "'");
}

Box3 parse_box(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 6) {
    throw ConfigError(std::string(field) +
                      ": expected [x_lo, x_hi, y_lo, y_hi, z_lo, z_hi]");
  }
  return Box3{j[0], j[1], j[2], j[3], j[4], j[5]};
}

Pose2 parse_pose(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError(std::string(field) + ": expected [x, y, heading_deg]");
  }
  return Pose2{j[0], j[1], deg2rad(j[2])};
}

std::string metric_or_na(const std::optional<double>& v) {
  return v ? format_double(*v) : "na";
}

}  // namespace

void RunConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs: must be >= 1");
  if (objectives.empty()) {
    throw ConfigError("objectives: at least one objective required");
  }
  if (scan_normal_k < 3) throw ConfigError("scan_normal_k: must be >= 3");
  try {
    search.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("search: ") + e.what());
  }
  if (mode == RunMode::kFromFiles) {
    if (files.map_path.empty()) throw ConfigError("files.map: required");
    if (files.scan_path.empty()) throw ConfigError("files.scan: required");
  }
  if (density_bias && !(density_bias->factor > 0.0)) {
    throw ConfigError("density_bias.factor: must be > 0");
  }
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }

  RunConfig cfg;
  const std::string mode = get_or<std::string>(j, "mode", "synthetic");
  if (mode == "synthetic") {
    cfg.mode = RunMode::kSynthetic;
  } else if (mode == "from_files") {
    cfg.mode = RunMode::kFromFiles;
  } else {
    throw ConfigError("mode: expected 'synthetic' or 'from_files'");
  }

  if (j.contains("scene")) {
    const json& s = j["scene"];
    cfg.scene.layout = parse_layout(get_or<std::string>(s, "layout", "corridor"));
    cfg.scene.street_width = get_or(s, "street_width", cfg.scene.street_width);
    cfg.scene.length = get_or(s, "length", cfg.scene.length);
    cfg.scene.facade_height = get_or(s, "facade_height", cfg.scene.facade_height);
    cfg.scene.map_spacing = get_or(s, "map_spacing", cfg.scene.map_spacing);
    cfg.scene.protrusion_density =
        get_or(s, "protrusion_density", cfg.scene.protrusion_density);
    cfg.scene.protrusion_side =
        parse_side(get_or<std::string>(s, "protrusion_side", "both"));
    if (s.contains("outlier_boxes")) {
      for (const auto& b : s["outlier_boxes"]) {
        cfg.scene.outlier_boxes.push_back(parse_box(b, "scene.outlier_boxes"));
      }
    }
  }
  if (j.contains("density_bias")) {
    const json& b = j["density_bias"];
    DensityBias bias;
    if (!b.contains("region")) throw ConfigError("density_bias.region: required");
    bias.region = parse_box(b["region"], "density_bias.region");
    bias.factor = get_or(b, "factor", 1.0);
    cfg.density_bias = bias;
  }
  if (j.contains("sensor")) {
    const json& s = j["sensor"];
    cfg.sensor.layers = get_or(s, "layers", cfg.sensor.layers);
    cfg.sensor.azimuth_step =
        deg2rad(get_or(s, "azimuth_step_deg", rad2deg(cfg.sensor.azimuth_step)));
    cfg.sensor.noise_sigma = get_or(s, "noise_sigma", cfg.sensor.noise_sigma);
    cfg.sensor.height = get_or(s, "height", cfg.sensor.height);
    cfg.sensor.max_range = get_or(s, "max_range", cfg.sensor.max_range);
  }
  if (j.contains("files")) {
    const json& f = j["files"];
    cfg.files.map_path = get_or<std::string>(f, "map", "");
    cfg.files.scan_path = get_or<std::string>(f, "scan", "");
    if (f.contains("truth")) cfg.files.truth = parse_pose(f["truth"], "files.truth");
  }
  if (j.contains("search")) {
    const json& s = j["search"];
    cfg.search.half_extent_xy = get_or(s, "half_extent", cfg.search.half_extent_xy);
    cfg.search.cell_size = get_or(s, "cell_size", cfg.search.cell_size);
    cfg.search.heading_half_range = deg2rad(
        get_or(s, "heading_half_range_deg", rad2deg(cfg.search.heading_half_range)));
    cfg.search.heading_step =
        deg2rad(get_or(s, "heading_step_deg", rad2deg(cfg.search.heading_step)));
    cfg.search.epsilon = get_or(s, "epsilon", cfg.search.cell_size);
    const std::string mm = get_or<std::string>(s, "match_mode", "all_pairs");
    if (mm == "all_pairs") {
      cfg.search.match_mode = MatchMode::kAllPairs;
    } else if (mm == "one_per_scan_point") {
      cfg.search.match_mode = MatchMode::kOnePerScanPoint;
    } else {
      throw ConfigError("search.match_mode: unknown value '" + mm + "'");
    }
  }
  if (j.contains("objectives")) {
    cfg.objectives.clear();
    for (const auto& o : j["objectives"]) {
      cfg.objectives.push_back(parse_objective(o.get<std::string>()));
    }
  }
  cfg.icp_study = get_or(j, "icp_study", cfg.icp_study);
  if (j.contains("icp")) {
    const json& s = j["icp"];
    cfg.icp.max_iterations = get_or(s, "max_iterations", cfg.icp.max_iterations);
    cfg.icp.rejection_radius =
        get_or(s, "rejection_radius", cfg.icp.rejection_radius);
  }
  cfg.epochs = get_or(j, "epochs", cfg.epochs);
  cfg.seed = get_or(j, "seed", cfg.seed);
  cfg.output_dir = std::filesystem::path(
      get_or<std::string>(j, "output_dir", cfg.output_dir.string()));
  cfg.workers = get_or(j, "workers", cfg.workers);
  cfg.heatmaps = get_or(j, "heatmaps", cfg.heatmaps);
  cfg.grid_csv = get_or(j, "grid_csv", cfg.grid_csv);
  cfg.scan_normal_k = get_or(j, "scan_normal_k", cfg.scan_normal_k);

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path.string());
}

std::string objective_name(Objective obj) {
  return obj == Objective::kCount ? "count" : "helmert";
}

namespace {

json metrics_to_json(const EpochMetrics& m) {
  json j;
  j["peak_ratio"] = m.peak_ratio ? json(*m.peak_ratio) : json(nullptr);
  j["kurtosis"] = m.kurtosis ? json(*m.kurtosis) : json(nullptr);
  j["kl_divergence"] = m.kl_divergence ? json(*m.kl_divergence) : json(nullptr);
  j["plateau_cells"] =
      m.plateau_distance ? json(*m.plateau_distance) : json(nullptr);
  j["ray"] = {m.ray.anchor_i, m.ray.anchor_j, m.ray.dir_x, m.ray.dir_y};
  return j;
}

EpochMetrics metrics_from_json(const json& j) {
  EpochMetrics m;
  if (!j["peak_ratio"].is_null()) m.peak_ratio = j["peak_ratio"].get<double>();
  if (!j["kurtosis"].is_null()) m.kurtosis = j["kurtosis"].get<double>();
  if (!j["kl_divergence"].is_null()) {
    m.kl_divergence = j["kl_divergence"].get<double>();
  }
  if (!j["plateau_cells"].is_null()) {
    m.plateau_distance = j["plateau_cells"].get<int>();
  }
  m.ray.anchor_i = j["ray"][0];
  m.ray.anchor_j = j["ray"][1];
  m.ray.dir_x = j["ray"][2];
  m.ray.dir_y = j["ray"][3];
  return m;
}

}  // namespace

std::string epoch_report_to_json(const EpochReport& report) {
  json j;
  j["epoch"] = report.epoch;
  json objs = json::array();
  for (const auto& o : report.objectives) {
    json jo;
    jo["objective"] = objective_name(o.objective);
    jo["best_index"] = {o.best_index.i, o.best_index.j, o.best_index.h};
    jo["best_offset_m"] = {o.best_offset.tx, o.best_offset.ty};
    jo["best_heading_rad"] = o.best_offset.theta;
    jo["best_value"] = o.best_value;
    jo["metrics"] = metrics_to_json(o.metrics);
    jo["seconds"] = o.seconds;
    objs.push_back(jo);
  }
  j["objectives"] = objs;
  if (report.icp_failed_runs >= 0) {
    j["icp"] = {{"failed_runs", report.icp_failed_runs},
                {"epoch_failed", report.icp_epoch_failed}};
  } else {
    j["icp"] = nullptr;
  }
  j["seconds"] = report.seconds;
  j["error"] = report.error.empty() ? json(nullptr) : json(report.error);
  return j.dump(2) + "\n";
}

EpochReport epoch_report_from_json(const std::string& text) {
  const json j = json::parse(text);
  EpochReport report;
  report.epoch = j["epoch"];
  for (const auto& jo : j["objectives"]) {
    ObjectiveReport o;
    o.objective = parse_objective(jo["objective"].get<std::string>());
    o.best_index = {jo["best_index"][0], jo["best_index"][1], jo["best_index"][2]};
    o.best_offset = {jo["best_offset_m"][0], jo["best_offset_m"][1],
                     jo["best_heading_rad"]};
    o.best_value = jo["best_value"];
    o.metrics = metrics_from_json(jo["metrics"]);
    o.seconds = jo["seconds"];
    report.objectives.push_back(o);
  }
  if (!j["icp"].is_null()) {
    report.icp_failed_runs = j["icp"]["failed_runs"];
    report.icp_epoch_failed = j["icp"]["epoch_failed"];
  }
  report.seconds = j["seconds"];
  if (!j["error"].is_null()) report.error = j["error"].get<std::string>();
  return report;
}

EpochData prepare_epoch(const RunConfig& config, int epoch) {
  EpochData data;
  if (config.mode == RunMode::kSynthetic) {
    SceneSpec scene = config.scene;
    scene.seed = mix_seed(config.seed, epoch, 1);
    data.map = generate_map(scene);
    if (config.density_bias) {
      data.map = apply_density_bias(data.map, *config.density_bias,
                                    mix_seed(config.seed, epoch, 2));
    }
    data.truth = Pose2::identity();
    data.scan = simulate_scan(scene, data.truth, config.sensor,
                              mix_seed(config.seed, epoch, 3));
  } else {
    const CloudData map_data = load_cloud(config.files.map_path);
    data.map.points = map_data.points;
    if (!map_data.normals.empty()) {
      data.map.normals = map_data.normals;
    } else {
      // Orient toward the cloud centroid as a street-interior proxy.
      Point3 centroid{0, 0, 0};
      for (const auto& p : map_data.points) {
        centroid.x += p.x;
        centroid.y += p.y;
        centroid.z += p.z;
      }
      const double n = static_cast<double>(map_data.points.size());
      centroid = {centroid.x / n, centroid.y / n, centroid.z / n};
      data.map.normals = estimate_normals(map_data.points, 12, centroid);
      // Degenerate map neighborhoods cannot carry a match; drop those points.
      MapCloud cleaned;
      for (size_t i = 0; i < data.map.points.size(); ++i) {
        if (!data.map.normals[i].valid()) continue;
        cleaned.points.push_back(data.map.points[i]);
        cleaned.normals.push_back(data.map.normals[i]);
      }
      data.map = std::move(cleaned);
    }
    const CloudData scan_data = load_cloud(config.files.scan_path);
    data.scan.points = scan_data.points;
    data.scan.normals = scan_data.normals;
    data.truth = config.files.truth;
  }
  data.initial = data.truth;

  const bool needs_normals =
      std::any_of(config.objectives.begin(), config.objectives.end(),
                  [](Objective o) { return o == Objective::kHelmert; });
  if (needs_normals && !data.scan.has_normals() && !data.scan.points.empty() &&
      data.scan.points.size() >= static_cast<size_t>(config.scan_normal_k)) {
    data.scan.normals =
        estimate_normals(data.scan.points, config.scan_normal_k,
                         Point3{0.0, 0.0, config.sensor.height});
  }
  return data;
}

EpochReport run_epoch(const RunConfig& config, int epoch) {
  const auto start = std::chrono::steady_clock::now();
  EpochReport report;
  report.epoch = epoch;

  const EpochData data = prepare_epoch(config, epoch);
  const bool parallel_epochs = config.epochs > 1 && config.workers != 1;
  SearchOptions options;
  options.threads = parallel_epochs ? 1 : config.workers;

  const VoxelIndex index(data.map.points, options.index_voxel_size);

  for (const Objective obj : config.objectives) {
    const LocalizationResult result = maximum_consensus(
        data.scan, data.initial, data.map, index, config.search, obj, options);
    ObjectiveReport o;
    o.objective = obj;
    o.best_index = result.best_index;
    o.best_offset = result.best_pose;
    o.best_value = result.best_value;
    o.metrics = compute_metrics(result.accumulator);
    o.seconds = result.seconds;
    report.objectives.push_back(o);

    if (config.heatmaps || config.grid_csv) {
      for (int h = 0; h < result.accumulator.heading_count(); ++h) {
        char name[64];
        if (config.heatmaps) {
          std::snprintf(name, sizeof(name), "epoch_%04d_%s_h%d.pgm", epoch,
                        objective_name(obj).c_str(), h);
          export_heatmap(result.accumulator.score_grid(h),
                         config.output_dir / name);
        }
        if (config.grid_csv) {
          std::snprintf(name, sizeof(name), "epoch_%04d_%s_h%d.csv", epoch,
                        objective_name(obj).c_str(), h);
          export_grid_csv(result.accumulator.score_grid(h),
                          config.output_dir / name);
        }
      }
    }
  }

  if (config.icp_study) {
    const ConvergenceStudy study = grid_convergence_study(
        data.scan, data.map, index, data.truth, config.icp,
        parallel_epochs ? 1 : config.workers);
    report.icp_failed_runs = 0;
    for (const auto& run : study.runs) {
      if (!run.result.reached_truth) ++report.icp_failed_runs;
    }
    report.icp_epoch_failed = study.epoch_failed;
  }

  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

namespace {

std::string csv_header() {
  return "epoch,objective,best_i,best_j,best_h,offset_x_m,offset_y_m,"
         "heading_deg,best_value,peak_ratio,kurtosis,kl_divergence,"
         "plateau_cells,ray_x,ray_y,icp_failed_runs,icp_epoch_failed,status\n";
}

void append_csv_rows(std::string& csv, const EpochReport& report) {
  if (!report.ok()) {
    csv += std::to_string(report.epoch) + ",-,,,,,,,,,,,,,,,," +
           "error: " + report.error + "\n";
    return;
  }
  for (const auto& o : report.objectives) {
    std::string row = std::to_string(report.epoch);
    row += "," + objective_name(o.objective);
    row += "," + std::to_string(o.best_index.i);
    row += "," + std::to_string(o.best_index.j);
    row += "," + std::to_string(o.best_index.h);
    row += "," + format_double(o.best_offset.tx);
    row += "," + format_double(o.best_offset.ty);
    row += "," + format_double(rad2deg(o.best_offset.theta));
    row += "," + format_double(o.best_value);
    row += "," + metric_or_na(o.metrics.peak_ratio);
    row += "," + metric_or_na(o.metrics.kurtosis);
    row += "," + metric_or_na(o.metrics.kl_divergence);
    row += ",";
    row += o.metrics.plateau_distance
               ? std::to_string(*o.metrics.plateau_distance)
               : std::string("na");
    row += "," + format_double(o.metrics.ray.dir_x);
    row += "," + format_double(o.metrics.ray.dir_y);
    row += ",";
    row += report.icp_failed_runs >= 0 ? std::to_string(report.icp_failed_runs)
                                       : std::string("na");
    row += ",";
    row += report.icp_failed_runs >= 0
               ? (report.icp_epoch_failed ? "true" : "false")
               : std::string("na");
    row += ",ok\n";
    csv += row;
  }
}

}  // namespace

BatchResult run_batch(const RunConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);

  BatchResult batch;
  batch.epochs.resize(config.epochs);
  parallel_for(config.epochs, config.workers, [&](int epoch) {
    EpochReport report;
    try {
      report = run_epoch(config, epoch);
    } catch (const std::exception& e) {
      report.epoch = epoch;
      report.error = e.what();
    }
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%04d.json", epoch);
    write_file_atomic(config.output_dir / name, epoch_report_to_json(report));
    batch.epochs[epoch] = std::move(report);
  });

  std::string csv = csv_header();
  for (const auto& report : batch.epochs) append_csv_rows(csv, report);
  batch.csv_path = config.output_dir / "epochs.csv";
  write_file_atomic(batch.csv_path, csv);

  batch.exit_code = 0;
  for (const auto& report : batch.epochs) {
    if (!report.ok()) batch.exit_code = 1;
  }
  return batch;
}

std::string study_csv(const ConvergenceStudy& study) {
  std::string csv =
      "init_offset_x,init_offset_y,final_x,final_y,final_heading_deg,"
      "iterations,converged,reached_truth,final_rms\n";
  for (const auto& run : study.runs) {
    csv += format_double(run.offset_x);
    csv += "," + format_double(run.offset_y);
    csv += "," + format_double(run.result.final_pose.tx);
    csv += "," + format_double(run.result.final_pose.ty);
    csv += "," + format_double(rad2deg(run.result.final_pose.theta));
    csv += "," + std::to_string(run.result.iterations);
    csv += run.result.converged ? ",true" : ",false";
    csv += run.result.reached_truth ? ",true" : ",false";
    csv += "," + format_double(run.result.final_rms);
    csv += "\n";
  }
  return csv;
}

}  // namespace mcloc
