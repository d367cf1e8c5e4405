#include "mcloc/search.hpp"

#include <chrono>
#include <cmath>

#include "mcloc/parallel.hpp"

namespace mcloc {

namespace {

ScanCloud pose_scan(const ScanCloud& scan, const Pose2& initial) {
  ScanCloud posed;
  posed.points.reserve(scan.points.size());
  for (const auto& p : scan.points) posed.points.push_back(se2_apply(initial, p));
  posed.normals.reserve(scan.normals.size());
  for (const auto& n : scan.normals) posed.normals.push_back(se2_rotate(initial, n));
  return posed;
}

// Per-cell de-duplication scratch for one-per-scan-point mode. Cells touched
// by the current scan point are stamped; Helmert keeps the highest-weight
// match per cell (ties: lower map index, so results do not depend on map
// point ordering).
struct DedupScratch {
  explicit DedupScratch(int dim)
      : dim(dim),
        stamp(static_cast<size_t>(dim) * dim, 0),
        weight(static_cast<size_t>(dim) * dim, 0.0),
        map_idx(static_cast<size_t>(dim) * dim, 0),
        wnx(static_cast<size_t>(dim) * dim, 0.0),
        wny(static_cast<size_t>(dim) * dim, 0.0) {}

  int dim;
  uint32_t current = 0;
  std::vector<uint32_t> stamp;
  std::vector<double> weight;
  std::vector<int> map_idx;
  std::vector<double> wnx, wny;
  std::vector<int> touched;
};

}  // namespace

void evaluate_heading(const ScanCloud& posed_scan, double center_x,
                      double center_y, const MapCloud& map,
                      const VoxelIndex& map_index, int h,
                      const SearchSpec& spec, Accumulator& acc) {
  const double theta = spec.heading_angle(h);
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double reach = spec.half_extent_xy + spec.epsilon;
  const bool helmert = acc.objective() == Objective::kHelmert;
  const bool dedup = spec.match_mode == MatchMode::kOnePerScanPoint;
  const int dim = acc.dim();

  DedupScratch scratch(dedup ? dim : 1);

  for (size_t sp = 0; sp < posed_scan.points.size(); ++sp) {
    const Point3 rotated =
        rotate_about(posed_scan.points[sp], cos_t, sin_t, center_x, center_y);
    UnitNormal3 scan_normal = UnitNormal3::invalid();
    if (helmert) {
      if (sp < posed_scan.normals.size()) {
        scan_normal = se2_rotate(Pose2{0.0, 0.0, theta}, posed_scan.normals[sp]);
      }
      if (!scan_normal.valid()) continue;  // excluded from the adjustment
    }

    if (!dedup) {
      map_index.for_each_in_box(
          rotated, reach, reach, spec.epsilon, [&](int mi, const Point3& q) {
            const double w =
                helmert ? match_weight(scan_normal, map.normals[mi]) : 1.0;
            splat(rotated, q, map.normals[mi], w, spec, acc, h);
          });
      continue;
    }

    // One-per-scan-point: collect this scan point's cells first, commit once.
    ++scratch.current;
    scratch.touched.clear();
    map_index.for_each_in_box(
        rotated, reach, reach, spec.epsilon, [&](int mi, const Point3& q) {
          const double dz = q.z - rotated.z;
          if (std::abs(dz) > spec.epsilon) return;
          double w = 1.0;
          if (helmert) {
            w = match_weight(scan_normal, map.normals[mi]);
            if (w <= 0.0) return;
          }
          const StencilRange ri = stencil_cell_range(
              q.x - rotated.x, spec.epsilon, spec.cell_size, dim);
          if (ri.lo > ri.hi) return;
          const StencilRange rj = stencil_cell_range(
              q.y - rotated.y, spec.epsilon, spec.cell_size, dim);
          for (int j = rj.lo; j <= rj.hi; ++j) {
            for (int i = ri.lo; i <= ri.hi; ++i) {
              const size_t c = static_cast<size_t>(j) * dim + i;
              if (scratch.stamp[c] != scratch.current) {
                scratch.stamp[c] = scratch.current;
                scratch.weight[c] = w;
                scratch.map_idx[c] = mi;
                scratch.touched.push_back(static_cast<int>(c));
              } else if (w > scratch.weight[c] ||
                         (w == scratch.weight[c] && mi < scratch.map_idx[c])) {
                scratch.weight[c] = w;
                scratch.map_idx[c] = mi;
              }
              if (helmert) {
                scratch.wnx[c] = map.normals[scratch.map_idx[c]].nx;
                scratch.wny[c] = map.normals[scratch.map_idx[c]].ny;
              }
            }
          }
        });
    if (scratch.touched.empty()) continue;
    for (int c : scratch.touched) {
      const int i = c % dim;
      const int j = c / dim;
      if (helmert) {
        const double w = scratch.weight[c];
        acc.add_moments(h, i, j, w * scratch.wnx[c] * scratch.wnx[c],
                        w * scratch.wnx[c] * scratch.wny[c],
                        w * scratch.wny[c] * scratch.wny[c]);
      } else {
        acc.add_count(h, i, j);
      }
    }
    acc.note_contribution(h);
  }
}

std::pair<double, GridIndex> accumulator_argmax(const Accumulator& acc) {
  double best = -1.0;
  GridIndex best_index;
  for (int h = 0; h < acc.heading_count(); ++h) {
    const Grid2<double> grid = acc.score_grid(h);
    for (int j = 0; j < acc.dim(); ++j) {
      for (int i = 0; i < acc.dim(); ++i) {
        if (grid(i, j) > best) {
          best = grid(i, j);
          best_index = {i, j, h};
        }
      }
    }
  }
  return {best, best_index};
}

LocalizationResult maximum_consensus(const ScanCloud& sensor_scan,
                                     const Pose2& initial_pose,
                                     const MapCloud& map,
                                     const VoxelIndex& map_index,
                                     const SearchSpec& spec, Objective obj,
                                     const SearchOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  spec.validate();
  sensor_scan.validate();
  map.validate();
  if (map.points.empty()) throw std::invalid_argument("map is empty");
  if (obj == Objective::kHelmert && !sensor_scan.has_normals()) {
    throw std::invalid_argument(
        "Helmert objective requires scan normals (estimate them first)");
  }
  if (sensor_scan.points.empty()) {
    throw EmptyConsensusError("empty scan: no matches anywhere");
  }

  const ScanCloud posed = pose_scan(sensor_scan, initial_pose);
  Accumulator acc(obj, spec);
  parallel_for(spec.heading_count(), options.threads, [&](int h) {
    evaluate_heading(posed, initial_pose.tx, initial_pose.ty, map, map_index,
                     h, spec, acc);
  });

  if (acc.total_contributions() == 0) {
    throw EmptyConsensusError(
        "no scan-map match in any cell of any heading (search range too "
        "small or map mismatch)");
  }

  LocalizationResult result{Pose2{}, GridIndex{}, 0.0, std::move(acc), obj, 0.0};
  const auto [best, best_index] = accumulator_argmax(result.accumulator);
  result.best_value = best;
  result.best_index = best_index;
  result.best_pose = Pose2{spec.cell_center(best_index.i),
                           spec.cell_center(best_index.j),
                           spec.heading_angle(best_index.h)};
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

LocalizationResult maximum_consensus(const ScanCloud& sensor_scan,
                                     const Pose2& initial_pose,
                                     const MapCloud& map,
                                     const SearchSpec& spec, Objective obj,
                                     const SearchOptions& options) {
  if (map.points.empty()) throw std::invalid_argument("map is empty");
  const VoxelIndex index(map.points, options.index_voxel_size);
  return maximum_consensus(sensor_scan, initial_pose, map, index, spec, obj,
                           options);
}

}  // namespace mcloc
