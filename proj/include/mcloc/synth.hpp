#pragma once

#include <cstdint>
#include <vector>

#include "mcloc/core.hpp"

namespace mcloc {

/// Axis-aligned vertical rectangle. axis 0: plane x = coord spanning y in
/// [t_lo, t_hi]; axis 1: plane y = coord spanning x in [t_lo, t_hi]. The
/// normal is normal_sign along `axis` (horizontal).
struct Facade {
  int axis = 1;
  double coord = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  double z_lo = 0.0;
  double z_hi = 0.0;
  double normal_sign = 1.0;
};

struct Box3 {
  double x_lo = 0.0, x_hi = 0.0;
  double y_lo = 0.0, y_hi = 0.0;
  double z_lo = 0.0, z_hi = 0.0;

  bool contains(const Point3& p) const {
    return p.x >= x_lo && p.x <= x_hi && p.y >= y_lo && p.y <= y_hi &&
           p.z >= z_lo && p.z <= z_hi;
  }
};

enum class Layout { kCorridor, kCrossing, kCustom };
enum class ProtrusionSide { kBoth, kPositiveOnly, kNegativeOnly };

/// Synthetic street scene. Corridor: two parallel facades along x. Crossing:
/// two perpendicular streets with eight wall segments. Protrusions are
/// balcony-like boxes on the base facades whose side faces constrain the
/// longitudinal direction; density is boxes per 10 m of facade.
struct SceneSpec {
  Layout layout = Layout::kCorridor;
  double street_width = 12.0;
  double length = 100.0;
  double facade_height = 6.0;
  double map_spacing = 0.12;
  double protrusion_density = 0.0;
  ProtrusionSide protrusion_side = ProtrusionSide::kBoth;
  std::vector<Facade> custom_facades;  // used when layout == kCustom
  /// Boxes visible to the scanner but absent from the map (parked cars and
  /// similar temporary objects).
  std::vector<Box3> outlier_boxes;
  uint64_t seed = 0;
};

/// Resolved scene geometry: surfaces present in the map and scan-only
/// surfaces (outlier boxes).
struct SceneGeometry {
  std::vector<Facade> map_facades;
  std::vector<Facade> scan_only;
};

SceneGeometry scene_facades(const SceneSpec& scene);

/// Regular-grid sampling of the map facades at map_spacing with analytic
/// normals. Deterministic for a fixed spec.
MapCloud generate_map(const SceneSpec& scene);

struct DensityBias {
  Box3 region;
  double factor = 1.0;  // < 1 thins, > 1 densifies with <= 1 cm jitter
};

MapCloud apply_density_bias(const MapCloud& map, const DensityBias& bias,
                            uint64_t seed);

/// VLP-16-like beam geometry.
struct SensorSpec {
  int layers = 16;
  double elev_min = deg2rad(-15.0);
  double elev_max = deg2rad(15.0);
  double azimuth_step = deg2rad(0.2);
  double noise_sigma = 0.01;  // isotropic, per axis; 3 sigma ~ +-3 cm
  double height = 1.8;
  double max_range = 100.0;
};

/// Ray-casts the sensor's beams from the true pose against the scene (map
/// facades plus outlier boxes), perturbs hits with Gaussian noise, and
/// returns points in the sensor's SE(2) frame: xy relative to the sensor and
/// un-rotated, z kept in world height so the 3-DoF pose transform aligns the
/// scan with the map. Misses are dropped. Throws std::runtime_error when the
/// sensor sits inside geometry.
ScanCloud simulate_scan(const SceneSpec& scene, const Pose2& true_pose,
                        const SensorSpec& sensor, uint64_t noise_seed);

}  // namespace mcloc
