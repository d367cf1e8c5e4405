#include "mcloc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mcloc {

namespace {

// Protrusion dimension ranges (meters). Vertical extents sit in the band the
// sensor's beams sweep on nearby facades; sizes vary per protrusion so no
// two side faces are interchangeable, and centers keep a minimum gap wider
// than the translation search window so distinct protrusions cannot be
// confused within it.
constexpr double kProtrusionWidthLo = 1.0;
constexpr double kProtrusionWidthHi = 2.0;
constexpr double kProtrusionDepthLo = 0.35;
constexpr double kProtrusionDepthHi = 0.65;
constexpr double kProtrusionZLoMin = 2.8;
constexpr double kProtrusionZLoMax = 3.4;
constexpr double kProtrusionZHiMin = 5.0;
constexpr double kProtrusionZHiMax = 5.6;
constexpr double kProtrusionMinGap = 8.0;

// Deterministic unit-interval and Gaussian draws on top of mt19937_64; the
// distribution code is pinned here so identical seeds give bit-identical
// clouds regardless of the standard library.
class Rng {
 public:
  explicit Rng(uint64_t seed) : rng_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {  // Box-Muller
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

void add_protrusions(const Facade& base, ProtrusionSide side, double density,
                     Rng& rng, std::vector<Facade>& out) {
  const double extent = base.t_hi - base.t_lo;
  if (extent < 3.0 * kProtrusionWidthHi) return;
  const int count = static_cast<int>(std::lround(density * extent / 10.0));
  std::vector<double> centers;
  for (int p = 0; p < count; ++p) {
    // Draw the geometry unconditionally so other protrusions keep their
    // placement when the side filter drops this one.
    double tc = rng.uniform(base.t_lo + kProtrusionWidthHi,
                            base.t_hi - kProtrusionWidthHi);
    const double width = rng.uniform(kProtrusionWidthLo, kProtrusionWidthHi);
    const double depth = rng.uniform(kProtrusionDepthLo, kProtrusionDepthHi);
    const double z_lo = rng.uniform(kProtrusionZLoMin, kProtrusionZLoMax);
    const double z_hi = rng.uniform(kProtrusionZHiMin, kProtrusionZHiMax);

    const bool positive_facade = base.coord > 0.0;
    if (side == ProtrusionSide::kPositiveOnly && !positive_facade) continue;
    if (side == ProtrusionSide::kNegativeOnly && positive_facade) continue;

    bool clear = false;
    for (int attempt = 0; attempt < 32 && !clear; ++attempt) {
      clear = true;
      for (double c : centers) {
        if (std::abs(tc - c) < kProtrusionMinGap) {
          clear = false;
          break;
        }
      }
      if (!clear) {
        tc = rng.uniform(base.t_lo + kProtrusionWidthHi,
                         base.t_hi - kProtrusionWidthHi);
      }
    }
    if (!clear) continue;
    centers.push_back(tc);

    const double front = base.coord + base.normal_sign * depth;
    const double near = std::min(base.coord, front);
    const double far = std::max(base.coord, front);
    // Two side faces perpendicular to the base facade, then the front face.
    out.push_back({1 - base.axis, tc - width / 2.0, near, far, z_lo, z_hi,
                   -1.0});
    out.push_back({1 - base.axis, tc + width / 2.0, near, far, z_lo, z_hi,
                   +1.0});
    out.push_back({base.axis, front, tc - width / 2.0, tc + width / 2.0, z_lo,
                   z_hi, base.normal_sign});
  }
}

std::vector<Facade> box_walls(const Box3& box) {
  return {
      {0, box.x_lo, box.y_lo, box.y_hi, box.z_lo, box.z_hi, -1.0},
      {0, box.x_hi, box.y_lo, box.y_hi, box.z_lo, box.z_hi, +1.0},
      {1, box.y_lo, box.x_lo, box.x_hi, box.z_lo, box.z_hi, -1.0},
      {1, box.y_hi, box.x_lo, box.x_hi, box.z_lo, box.z_hi, +1.0},
  };
}

}  // namespace

SceneGeometry scene_facades(const SceneSpec& scene) {
  SceneGeometry geo;
  const double w2 = scene.street_width / 2.0;
  const double l2 = scene.length / 2.0;
  const double h = scene.facade_height;

  std::vector<Facade> bases;
  switch (scene.layout) {
    case Layout::kCorridor:
      bases.push_back({1, +w2, -l2, +l2, 0.0, h, -1.0});
      bases.push_back({1, -w2, -l2, +l2, 0.0, h, +1.0});
      break;
    case Layout::kCrossing:
      for (const double sign : {+1.0, -1.0}) {
        for (const auto& [lo, hi] : {std::pair{w2, l2}, std::pair{-l2, -w2}}) {
          bases.push_back({1, sign * w2, lo, hi, 0.0, h, -sign});
          bases.push_back({0, sign * w2, lo, hi, 0.0, h, -sign});
        }
      }
      break;
    case Layout::kCustom:
      bases = scene.custom_facades;
      break;
  }

  geo.map_facades = bases;
  if (scene.protrusion_density > 0.0 && scene.layout != Layout::kCustom) {
    Rng rng(scene.seed);
    for (const auto& base : bases) {
      add_protrusions(base, scene.protrusion_side, scene.protrusion_density,
                      rng, geo.map_facades);
    }
  }
  for (const auto& box : scene.outlier_boxes) {
    const auto walls = box_walls(box);
    geo.scan_only.insert(geo.scan_only.end(), walls.begin(), walls.end());
  }
  return geo;
}

MapCloud generate_map(const SceneSpec& scene) {
  const SceneGeometry geo = scene_facades(scene);
  MapCloud map;
  for (const auto& f : geo.map_facades) {
    const double spacing = scene.map_spacing;
    for (double t = f.t_lo + spacing / 2.0; t < f.t_hi; t += spacing) {
      for (double z = f.z_lo + spacing / 2.0; z < f.z_hi; z += spacing) {
        if (f.axis == 0) {
          map.points.push_back({f.coord, t, z});
          map.normals.push_back({f.normal_sign, 0.0, 0.0});
        } else {
          map.points.push_back({t, f.coord, z});
          map.normals.push_back({0.0, f.normal_sign, 0.0});
        }
      }
    }
  }
  return map;
}

MapCloud apply_density_bias(const MapCloud& map, const DensityBias& bias,
                            uint64_t seed) {
  if (!(bias.factor > 0.0)) {
    throw std::invalid_argument("density bias factor must be > 0");
  }
  Rng rng(seed);
  MapCloud out;
  out.points.reserve(map.points.size());
  out.normals.reserve(map.normals.size());
  constexpr double kJitter = 0.01;
  for (size_t idx = 0; idx < map.points.size(); ++idx) {
    const Point3& p = map.points[idx];
    if (!bias.region.contains(p)) {
      out.points.push_back(p);
      out.normals.push_back(map.normals[idx]);
      continue;
    }
    if (bias.factor < 1.0) {
      if (rng.uniform() < bias.factor) {
        out.points.push_back(p);
        out.normals.push_back(map.normals[idx]);
      }
      continue;
    }
    out.points.push_back(p);
    out.normals.push_back(map.normals[idx]);
    const double extra = bias.factor - 1.0;
    int dupes = static_cast<int>(std::floor(extra));
    if (rng.uniform() < extra - dupes) ++dupes;
    for (int d = 0; d < dupes; ++d) {
      out.points.push_back({p.x + rng.uniform(-kJitter, kJitter),
                            p.y + rng.uniform(-kJitter, kJitter),
                            p.z + rng.uniform(-kJitter, kJitter)});
      out.normals.push_back(map.normals[idx]);
    }
  }
  return out;
}

ScanCloud simulate_scan(const SceneSpec& scene, const Pose2& true_pose,
                        const SensorSpec& sensor, uint64_t noise_seed) {
  const SceneGeometry geo = scene_facades(scene);
  std::vector<Facade> surfaces = geo.map_facades;
  surfaces.insert(surfaces.end(), geo.scan_only.begin(), geo.scan_only.end());

  Rng rng(noise_seed);
  ScanCloud scan;
  const double ox = true_pose.tx;
  const double oy = true_pose.ty;
  const double oz = sensor.height;
  for (const auto& box : scene.outlier_boxes) {
    if (box.contains({ox, oy, oz})) {
      throw std::runtime_error("simulate_scan: sensor inside geometry");
    }
  }
  const int azimuths =
      static_cast<int>(std::lround(2.0 * kPi / sensor.azimuth_step));
  const double elev_step =
      sensor.layers > 1 ? (sensor.elev_max - sensor.elev_min) / (sensor.layers - 1)
                        : 0.0;
  const double cos_inv = std::cos(-true_pose.theta);
  const double sin_inv = std::sin(-true_pose.theta);

  for (int layer = 0; layer < sensor.layers; ++layer) {
    const double elev = sensor.elev_min + layer * elev_step;
    const double ce = std::cos(elev);
    const double se = std::sin(elev);
    for (int a = 0; a < azimuths; ++a) {
      const double az = a * sensor.azimuth_step + true_pose.theta;
      const double dx = ce * std::cos(az);
      const double dy = ce * std::sin(az);
      const double dz = se;

      double t_hit = sensor.max_range;
      bool hit = false;
      for (const auto& f : surfaces) {
        const double denom = f.axis == 0 ? dx : dy;
        if (std::abs(denom) < 1e-12) continue;
        const double origin_axis = f.axis == 0 ? ox : oy;
        const double t = (f.coord - origin_axis) / denom;
        if (t <= 1e-6 || t >= t_hit) continue;
        const double tt = f.axis == 0 ? oy + t * dy : ox + t * dx;
        const double zz = oz + t * dz;
        if (tt < f.t_lo || tt > f.t_hi || zz < f.z_lo || zz > f.z_hi) continue;
        t_hit = t;
        hit = true;
      }
      if (!hit) continue;
      if (t_hit < 0.2) {
        throw std::runtime_error("simulate_scan: sensor inside geometry");
      }

      const double hx = ox + t_hit * dx + sensor.noise_sigma * rng.normal();
      const double hy = oy + t_hit * dy + sensor.noise_sigma * rng.normal();
      const double hz = oz + t_hit * dz + sensor.noise_sigma * rng.normal();
      // Back to the SE(2) sensor frame; z stays at world height.
      const double rx = hx - ox;
      const double ry = hy - oy;
      scan.points.push_back(
          {cos_inv * rx - sin_inv * ry, sin_inv * rx + cos_inv * ry, hz});
    }
  }
  return scan;
}

}  // namespace mcloc
