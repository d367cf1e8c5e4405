// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit code is the failure count.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mcloc/core.hpp"
#include "mcloc/icp.hpp"
#include "mcloc/index.hpp"
#include "mcloc/io.hpp"
#include "mcloc/metrics.hpp"
#include "mcloc/objectives.hpp"
#include "mcloc/oracle.hpp"
#include "mcloc/pipeline.hpp"
#include "mcloc/search.hpp"
#include "mcloc/synth.hpp"

using namespace mcloc;

namespace {

struct Epoch {
  MapCloud map;
  ScanCloud scan;  // normals filled
};

SceneSpec corridor_scene(uint64_t seed, double protrusion_density) {
  SceneSpec scene;
  scene.layout = Layout::kCorridor;
  scene.street_width = 8.0;
  scene.length = 100.0;
  scene.facade_height = 6.0;
  scene.map_spacing = 0.12;
  scene.protrusion_density = protrusion_density;
  scene.protrusion_side = ProtrusionSide::kNegativeOnly;
  scene.seed = seed;
  return scene;
}

SceneSpec crossing_scene(uint64_t seed) {
  SceneSpec scene;
  scene.layout = Layout::kCrossing;
  scene.street_width = 12.0;
  scene.length = 60.0;
  scene.facade_height = 6.0;
  scene.map_spacing = 0.12;
  scene.seed = seed;
  return scene;
}

Epoch make_epoch(const SceneSpec& scene, uint64_t noise_seed,
                 bool with_patch = false) {
  Epoch epoch;
  epoch.map = generate_map(scene);
  if (with_patch) {
    // 3x density on the +y facade, offset down the corridor so the densest
    // part of the scan only overlaps it under a longitudinal shift.
    DensityBias bias;
    bias.region = {1.5, 6.5, scene.street_width / 2.0 - 0.2,
                   scene.street_width / 2.0 + 0.2, 0.0, scene.facade_height};
    bias.factor = 3.0;
    epoch.map = apply_density_bias(epoch.map, bias, noise_seed + 11);
  }
  epoch.scan = simulate_scan(scene, Pose2::identity(), SensorSpec{}, noise_seed);
  epoch.scan.normals =
      estimate_normals(epoch.scan.points, 20, {0.0, 0.0, 1.8});
  return epoch;
}

int center_cell(const SearchSpec& spec) { return spec.grid_dim() / 2; }

int cheb_from_center(const LocalizationResult& r, const SearchSpec& spec) {
  const int c = center_cell(spec);
  return std::max(std::abs(r.best_index.i - c), std::abs(r.best_index.j - c));
}

ScanCloud subsample(const ScanCloud& scan, size_t stride) {
  ScanCloud out;
  for (size_t i = 0; i < scan.points.size(); i += stride) {
    out.points.push_back(scan.points[i]);
  }
  return out;
}

// Shared across criteria: Helmert plateau distances of every constrained
// synthetic epoch (criteria 6-8), checked by criterion 9.
std::vector<int> g_helmert_plateaus;

// ---------------------------------------------------------------------------

bool criterion_1_score_algebra(std::string& detail) {
  // Accumulated orthogonal groups: n1 along x, n2 along y.
  for (const long n : {1L, 10L, 1000L}) {
    NormalEquations2 ne;
    for (long k = 0; k < n; ++k) ne.add(1.0, 0.0, 1.0);
    for (long k = 0; k < n; ++k) ne.add(0.0, 1.0, 1.0);
    if (std::abs(helmert_score(ne) - n / 2.0) > 1e-9) {
      detail = "score(n=n1=n2=" + std::to_string(n) + ") != n/2";
      return false;
    }
  }
  for (const auto& [n1, n2] : std::vector<std::pair<double, double>>{
           {3, 7}, {2, 100}, {17, 17}}) {
    NormalEquations2 ne;
    ne.sxx = n1;
    ne.syy = n2;
    const double want = 1.0 / (1.0 / n1 + 1.0 / n2);
    if (std::abs(helmert_score(ne) - want) > 1e-9) {
      detail = "score != 1/(1/n1 + 1/n2)";
      return false;
    }
  }
  // One observation in x: score = n2/(n2+1) < 1 no matter how large n2.
  for (long n2 = 1; n2 <= 1000000; ++n2) {
    NormalEquations2 ne;
    ne.sxx = 1.0;
    ne.syy = static_cast<double>(n2);
    const double score = helmert_score(ne);
    if (!(score < 1.0) ||
        std::abs(score - n2 / (n2 + 1.0)) > 1e-9) {
      detail = "single-observation bound violated at n2=" + std::to_string(n2);
      return false;
    }
  }
  detail = "n/2 growth and the n2/(n2+1) < 1 bound hold to 1e-9";
  return true;
}

bool criterion_2_trace_det_identity(std::string& detail) {
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100000; ++trial) {
    const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    NormalEquations2 ne;
    ne.sxx = a * a + c * c + 0.05;
    ne.syy = b * b + d * d + 0.05;
    ne.sxy = a * b + c * d;

    const double fast = helmert_score(ne);
    const double ref = helmert_score_reference(ne);
    const double rel = std::abs(fast - ref) / std::max(std::abs(ref), 1e-300);
    worst = std::max(worst, rel);
    if (rel > 1e-10) {
      detail = "relative deviation " + std::to_string(rel);
      return false;
    }
  }
  std::ostringstream os;
  os << "100000 SPD matrices, worst relative deviation " << worst;
  detail = os.str();
  return true;
}

bool criterion_3_oracle_equivalence(std::string& detail) {
  std::mt19937_64 rng(1003);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  std::uniform_real_distribution<double> zco(0.0, 0.5);
  std::uniform_real_distribution<double> angle(-kPi, kPi);

  SearchSpec spec;
  spec.half_extent_xy = 0.63;
  spec.cell_size = 0.06;
  spec.epsilon = 0.06;
  spec.heading_half_range = deg2rad(0.5);
  spec.heading_step = deg2rad(0.5);

  for (int instance = 0; instance < 50; ++instance) {
    const bool quantize = instance % 4 == 3;
    const int scan_n = 100 + static_cast<int>(rng() % 200);
    const int map_n = 800 + static_cast<int>(rng() % 2000);
    auto snap = [&](double v) {
      return quantize ? std::round(v / 0.03) * 0.03 : v;
    };

    ScanCloud scan;
    MapCloud map;
    for (int i = 0; i < scan_n; ++i) {
      scan.points.push_back({snap(coord(rng)), snap(coord(rng)), snap(zco(rng))});
      const double a = angle(rng);
      scan.normals.push_back(
          UnitNormal3::from_direction(std::cos(a), std::sin(a), 0.2 * coord(rng)));
    }
    for (int i = 0; i < map_n; ++i) {
      map.points.push_back({snap(coord(rng)), snap(coord(rng)), snap(zco(rng))});
      const double a = angle(rng);
      map.normals.push_back(
          UnitNormal3::from_direction(std::cos(a), std::sin(a), 0.2 * coord(rng)));
    }
    const Pose2 initial{0.02, -0.07, deg2rad(1.5)};

    const auto count = maximum_consensus(scan, initial, map, spec,
                                         Objective::kCount);
    const auto count_oracle =
        brute_force_oracle(scan, initial, map, spec, Objective::kCount);
    for (int h = 0; h < count.accumulator.heading_count(); ++h) {
      for (int j = 0; j < count.accumulator.dim(); ++j) {
        for (int i = 0; i < count.accumulator.dim(); ++i) {
          if (count.accumulator.count_at(h, i, j) !=
              count_oracle.count_at(h, i, j)) {
            detail = "count mismatch on instance " + std::to_string(instance);
            return false;
          }
        }
      }
    }

    const auto helm = maximum_consensus(scan, initial, map, spec,
                                        Objective::kHelmert);
    const auto helm_oracle =
        brute_force_oracle(scan, initial, map, spec, Objective::kHelmert);
    for (int h = 0; h < helm.accumulator.heading_count(); ++h) {
      for (int j = 0; j < helm.accumulator.dim(); ++j) {
        for (int i = 0; i < helm.accumulator.dim(); ++i) {
          const auto a = helm.accumulator.moments_at(h, i, j);
          const auto b = helm_oracle.moments_at(h, i, j);
          if (std::abs(a.sxx - b.sxx) > 1e-9 ||
              std::abs(a.sxy - b.sxy) > 1e-9 ||
              std::abs(a.syy - b.syy) > 1e-9) {
            detail = "moment mismatch on instance " + std::to_string(instance);
            return false;
          }
        }
      }
    }
  }
  detail = "50 micro-instances: count grids exact, moments within 1e-9";
  return true;
}

bool criterion_4_rotation_invariance(std::string& detail) {
  std::mt19937_64 rng(1004);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::uniform_real_distribution<double> wdist(0.1, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    NormalEquations2 base, rotated;
    double phi = angle(rng);
    do {
      base = NormalEquations2{};
      rotated = NormalEquations2{};
      const int n = 3 + static_cast<int>(rng() % 30);
      for (int k = 0; k < n; ++k) {
        const double a = angle(rng);
        const double w = wdist(rng);
        base.add(std::cos(a), std::sin(a), w);
        rotated.add(std::cos(a + phi), std::sin(a + phi), w);
      }
    } while (base.det() < 1e-6);

    const double s0 = helmert_score(base);
    const double s1 = helmert_score(rotated);
    const double rel = std::abs(s0 - s1) / std::max(std::abs(s0), 1e-300);
    worst = std::max(worst, rel);
    if (rel > 1e-9) {
      detail = "relative change " + std::to_string(rel);
      return false;
    }
  }
  std::ostringstream os;
  os << "100 rotated consensus sets, worst relative change " << worst;
  detail = os.str();
  return true;
}

bool criterion_5_degeneracy(std::string& detail) {
  const SearchSpec spec;

  const Epoch corridor = make_epoch(corridor_scene(1051, 0.0), 2051);
  const Epoch crossing = make_epoch(crossing_scene(1052), 2052);

  const auto helm_corridor = maximum_consensus(
      corridor.scan, Pose2::identity(), corridor.map, spec, Objective::kHelmert);
  const auto helm_crossing = maximum_consensus(
      crossing.scan, Pose2::identity(), crossing.map, spec, Objective::kHelmert);

  double corridor_max = 0.0;
  for (int h = 0; h < helm_corridor.accumulator.heading_count(); ++h) {
    const auto grid = helm_corridor.accumulator.score_grid(h);
    for (double v : grid.data()) corridor_max = std::max(corridor_max, v);
  }
  if (!(corridor_max <= 1e-6 * helm_crossing.best_value)) {
    detail = "corridor Helmert max " + std::to_string(corridor_max) +
             " vs crossing peak " + std::to_string(helm_crossing.best_value);
    return false;
  }

  const auto count_corridor = maximum_consensus(
      corridor.scan, Pose2::identity(), corridor.map, spec, Objective::kCount);
  const auto plateau = plateau_distance(count_corridor.accumulator);
  if (!plateau || *plateau < 10) {
    detail = "count plateau " + std::to_string(plateau ? *plateau : -1);
    return false;
  }

  std::ostringstream os;
  os << "corridor Helmert max " << corridor_max << " (crossing peak "
     << helm_crossing.best_value << "), count plateau " << *plateau;
  detail = os.str();
  return true;
}

bool criterion_6_density_bias(std::string& detail) {
  const SearchSpec spec;
  int count_far = 0;
  int helmert_near = 0;
  for (int e = 0; e < 10; ++e) {
    const Epoch epoch =
        make_epoch(corridor_scene(1060 + e, 0.7), 2060 + e, true);
    const auto count = maximum_consensus(epoch.scan, Pose2::identity(),
                                         epoch.map, spec, Objective::kCount);
    const auto helm = maximum_consensus(epoch.scan, Pose2::identity(),
                                        epoch.map, spec, Objective::kHelmert);
    if (cheb_from_center(count, spec) >= 5) ++count_far;
    if (cheb_from_center(helm, spec) <= 1) ++helmert_near;
    g_helmert_plateaus.push_back(
        plateau_distance(helm.accumulator).value_or(999));
  }
  std::ostringstream os;
  os << "count argmax >= 5 cells off in " << count_far
     << "/10, Helmert within 1 cell in " << helmert_near << "/10";
  detail = os.str();
  return count_far >= 8 && helmert_near == 10;
}

bool criterion_7_crossing_distinctness(std::string& detail) {
  const SearchSpec spec;
  const int c = center_cell(spec);
  int both_centered = 0;
  for (int e = 0; e < 10; ++e) {
    const Epoch epoch = make_epoch(crossing_scene(1070 + e), 2070 + e);
    const auto count = maximum_consensus(epoch.scan, Pose2::identity(),
                                         epoch.map, spec, Objective::kCount);
    const auto helm = maximum_consensus(epoch.scan, Pose2::identity(),
                                        epoch.map, spec, Objective::kHelmert);
    if (count.best_index.i == c && count.best_index.j == c &&
        helm.best_index.i == c && helm.best_index.j == c) {
      ++both_centered;
    }
    g_helmert_plateaus.push_back(
        plateau_distance(helm.accumulator).value_or(999));
  }
  detail = "both objectives at the center cell in " +
           std::to_string(both_centered) + "/10 epochs";
  return both_centered == 10;
}

bool criterion_8_metric_directions(std::string& detail) {
  const SearchSpec spec;
  std::vector<double> ratio_c, ratio_h, kurt_c, kurt_h, kl_c, kl_h;

  for (int e = 0; e < 20; ++e) {
    const bool is_corridor = e < 10;
    const Epoch epoch =
        is_corridor ? make_epoch(corridor_scene(1080 + e, 0.7), 2080 + e)
                    : make_epoch(crossing_scene(1080 + e), 2080 + e);
    const auto count = maximum_consensus(epoch.scan, Pose2::identity(),
                                         epoch.map, spec, Objective::kCount);
    const auto helm = maximum_consensus(epoch.scan, Pose2::identity(),
                                        epoch.map, spec, Objective::kHelmert);
    const EpochMetrics mc = compute_metrics(count.accumulator);
    const EpochMetrics mh = compute_metrics(helm.accumulator);
    if (!mc.peak_ratio || !mh.peak_ratio || !mc.kurtosis || !mh.kurtosis ||
        !mc.kl_divergence || !mh.kl_divergence) {
      detail = "undefined metric on epoch " + std::to_string(e);
      return false;
    }
    ratio_c.push_back(*mc.peak_ratio);
    ratio_h.push_back(*mh.peak_ratio);
    kurt_c.push_back(*mc.kurtosis);
    kurt_h.push_back(*mh.kurtosis);
    kl_c.push_back(*mc.kl_divergence);
    kl_h.push_back(*mh.kl_divergence);
    g_helmert_plateaus.push_back(
        plateau_distance(helm.accumulator).value_or(999));
  }

  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return 0.5 * (v[v.size() / 2] + v[(v.size() - 1) / 2]);
  };
  const double mr_c = median(ratio_c), mr_h = median(ratio_h);
  const double mk_c = median(kurt_c), mk_h = median(kurt_h);
  const double ml_c = median(kl_c), ml_h = median(kl_h);

  std::ostringstream os;
  os.precision(4);
  os << "medians over 20 epochs: ratio " << mr_h << " vs " << mr_c
     << ", kurtosis " << mk_h << " vs " << mk_c << ", KL " << ml_h << " vs "
     << ml_c << " (Helmert vs count)";
  detail = os.str();
  return mr_h < mr_c && mk_h > mk_c && ml_h < ml_c;
}

bool criterion_9_plateau(std::string& detail) {
  if (g_helmert_plateaus.empty()) {
    detail = "no epochs collected";
    return false;
  }
  const int worst =
      *std::max_element(g_helmert_plateaus.begin(), g_helmert_plateaus.end());
  detail = "Helmert plateau <= " + std::to_string(worst) + " cells over " +
           std::to_string(g_helmert_plateaus.size()) + " epochs";
  return worst <= 1;
}

bool criterion_10_icp_basin(std::string& detail) {
  const SearchSpec spec;
  int corridor_failed = 0;
  bool helmert_centered = true;
  for (int e = 0; e < 2; ++e) {
    const Epoch epoch = make_epoch(corridor_scene(1100 + e, 0.7), 2100 + e);
    const VoxelIndex index(epoch.map.points, 0.75);
    const ConvergenceStudy study = grid_convergence_study(
        subsample(epoch.scan, 4), epoch.map, index, Pose2::identity());
    if (study.epoch_failed) ++corridor_failed;
    const auto helm = maximum_consensus(epoch.scan, Pose2::identity(),
                                        epoch.map, index, spec,
                                        Objective::kHelmert);
    if (cheb_from_center(helm, spec) > 1) helmert_centered = false;
  }

  bool crossing_ok = true;
  for (int e = 0; e < 2; ++e) {
    const Epoch epoch = make_epoch(crossing_scene(1110 + e), 2110 + e);
    const VoxelIndex index(epoch.map.points, 0.75);
    const ConvergenceStudy study = grid_convergence_study(
        subsample(epoch.scan, 4), epoch.map, index, Pose2::identity());
    if (study.epoch_failed) crossing_ok = false;
  }

  std::ostringstream os;
  os << corridor_failed << "/2 corridor epochs failed the ICP study "
     << "(Helmert centered: " << (helmert_centered ? "yes" : "no")
     << "), crossing epochs " << (crossing_ok ? "all converged" : "FAILED");
  detail = os.str();
  return corridor_failed >= 1 && helmert_centered && crossing_ok;
}

bool criterion_11_performance(std::string& detail) {
  SceneSpec scene = corridor_scene(1111, 0.3);
  scene.length = 200.0;
  scene.facade_height = 5.0;
  scene.map_spacing = 0.1;
  const MapCloud map = generate_map(scene);

  ScanCloud scan = simulate_scan(scene, Pose2::identity(), SensorSpec{}, 2111);
  // Exactly 10000 points, sampled evenly across the sweep.
  ScanCloud bench;
  const double stride = scan.points.size() / 10000.0;
  for (int i = 0; i < 10000; ++i) {
    bench.points.push_back(scan.points[static_cast<size_t>(i * stride)]);
  }
  bench.normals = estimate_normals(bench.points, 20, {0.0, 0.0, 1.8});

  const SearchSpec spec;
  SearchOptions parallel;
  parallel.threads = 4;
  SearchOptions serial;
  serial.threads = 1;

  const auto t0 = std::chrono::steady_clock::now();
  const auto count_par = maximum_consensus(bench, Pose2::identity(), map, spec,
                                           Objective::kCount, parallel);
  const auto helm_par = maximum_consensus(bench, Pose2::identity(), map, spec,
                                          Objective::kHelmert, parallel);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  const auto count_ser = maximum_consensus(bench, Pose2::identity(), map, spec,
                                           Objective::kCount, serial);
  const auto helm_ser = maximum_consensus(bench, Pose2::identity(), map, spec,
                                          Objective::kHelmert, serial);

  for (int h = 0; h < spec.heading_count(); ++h) {
    for (int j = 0; j < spec.grid_dim(); ++j) {
      for (int i = 0; i < spec.grid_dim(); ++i) {
        if (count_par.accumulator.count_at(h, i, j) !=
            count_ser.accumulator.count_at(h, i, j)) {
          detail = "parallel/serial count grids differ";
          return false;
        }
        const auto a = helm_par.accumulator.moments_at(h, i, j);
        const auto b = helm_ser.accumulator.moments_at(h, i, j);
        if (std::abs(a.sxx - b.sxx) > 1e-9 || std::abs(a.sxy - b.sxy) > 1e-9 ||
            std::abs(a.syy - b.syy) > 1e-9) {
          detail = "parallel/serial Helmert grids differ beyond 1e-9";
          return false;
        }
      }
    }
  }

  std::ostringstream os;
  os.precision(3);
  os << "map " << map.points.size() << " pts, scan 10000 pts, both objectives "
     << "in " << elapsed << " s on 4 threads; parallel == serial";
  detail = os.str();
  return elapsed <= 10.0;
}

bool criterion_12_determinism(std::string& detail) {
  const auto root = std::filesystem::temp_directory_path() /
                    ("mcloc_acceptance_" + std::to_string(std::random_device{}()));
  std::filesystem::create_directories(root);

  auto config_for = [&](const std::string& name) {
    const std::string text = std::string(R"({
      "mode": "synthetic",
      "scene": {"layout": "crossing", "length": 50.0, "map_spacing": 0.15},
      "sensor": {"azimuth_step_deg": 0.5},
      "search": {"half_extent": 1.5, "cell_size": 0.06,
                 "heading_half_range_deg": 1.0, "heading_step_deg": 0.5},
      "objectives": ["count", "helmert"],
      "epochs": 4,
      "seed": 99,
      "workers": 4,
      "output_dir": ")") + (root / name).string() + "\"}";
    return parse_run_config(text, "determinism");
  };

  const BatchResult a = run_batch(config_for("a"));
  const BatchResult b = run_batch(config_for("b"));

  auto read_bytes = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const std::string csv_a = read_bytes(a.csv_path);
  const std::string csv_b = read_bytes(b.csv_path);
  std::filesystem::remove_all(root);

  if (csv_a.empty() || csv_a != csv_b) {
    detail = "aggregate CSVs differ between identical seeded runs";
    return false;
  }
  detail = "two seeded 4-epoch batches: aggregate CSVs byte-identical";
  return true;
}

struct Criterion {
  int id;
  const char* name;
  bool (*fn)(std::string&);
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "score algebra", criterion_1_score_algebra},
      {2, "trace/det identity", criterion_2_trace_det_identity},
      {3, "oracle equivalence", criterion_3_oracle_equivalence},
      {4, "rotation invariance", criterion_4_rotation_invariance},
      {5, "corridor degeneracy", criterion_5_degeneracy},
      {6, "density-bias failure", criterion_6_density_bias},
      {7, "crossing distinctness", criterion_7_crossing_distinctness},
      {8, "metric directions", criterion_8_metric_directions},
      {9, "Helmert plateau", criterion_9_plateau},
      {10, "ICP basin", criterion_10_icp_basin},
      {11, "performance envelope", criterion_11_performance},
      {12, "determinism", criterion_12_determinism},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = criterion.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%s] %2d %-22s %s (%.1f s)\n", ok ? "PASS" : "FAIL",
                criterion.id, criterion.name, detail.c_str(), seconds);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures;
}
