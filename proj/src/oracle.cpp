#include "mcloc/oracle.hpp"

#include <cmath>

namespace mcloc {

namespace {

struct PairOffset {
  double dx, dy;
  double wxx, wxy, wyy;  // weighted map-normal moments (Helmert)
  double w;
  int scan_idx;
  int map_idx;
};

}  // namespace

Accumulator brute_force_oracle(const ScanCloud& sensor_scan,
                               const Pose2& initial_pose, const MapCloud& map,
                               const SearchSpec& spec, Objective obj) {
  spec.validate();
  const int dim = spec.grid_dim();
  const int headings = spec.heading_count();
  if (sensor_scan.points.size() > 500 || map.points.size() > 5000 ||
      dim * dim * headings > 21 * 21 * 9) {
    throw std::invalid_argument("brute_force_oracle: instance too large");
  }

  // Pose the scan exactly as the pipeline does.
  std::vector<Point3> posed_points;
  std::vector<UnitNormal3> posed_normals;
  for (const auto& p : sensor_scan.points) {
    posed_points.push_back(se2_apply(initial_pose, p));
  }
  for (const auto& n : sensor_scan.normals) {
    posed_normals.push_back(se2_rotate(initial_pose, n));
  }

  const bool helmert = obj == Objective::kHelmert;
  const bool dedup = spec.match_mode == MatchMode::kOnePerScanPoint;
  const double eps = spec.epsilon;
  // |d - center| <= eps is impossible beyond the extreme cell centers + eps;
  // the slack absorbs rounding so the prefilter is a strict superset.
  const double max_center =
      std::max(std::abs(spec.cell_center(0)), std::abs(spec.cell_center(dim - 1)));
  const double reach = max_center + eps + 1e-9;

  Accumulator acc(obj, spec);
  std::vector<PairOffset> pairs;
  for (int h = 0; h < headings; ++h) {
    const double theta = spec.heading_angle(h);
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);

    pairs.clear();
    for (size_t sp = 0; sp < posed_points.size(); ++sp) {
      const Point3 rotated = rotate_about(posed_points[sp], cos_t, sin_t,
                                          initial_pose.tx, initial_pose.ty);
      UnitNormal3 scan_normal = UnitNormal3::invalid();
      if (helmert) {
        if (sp < posed_normals.size()) {
          scan_normal = se2_rotate(Pose2{0.0, 0.0, theta}, posed_normals[sp]);
        }
        if (!scan_normal.valid()) continue;
      }
      for (size_t mp = 0; mp < map.points.size(); ++mp) {
        const double dx = map.points[mp].x - rotated.x;
        const double dy = map.points[mp].y - rotated.y;
        const double dz = map.points[mp].z - rotated.z;
        if (std::abs(dz) > eps) continue;
        if (std::abs(dx) > reach || std::abs(dy) > reach) continue;
        PairOffset po{dx, dy, 0.0, 0.0, 0.0, 1.0,
                      static_cast<int>(sp), static_cast<int>(mp)};
        if (helmert) {
          po.w = match_weight(scan_normal, map.normals[mp]);
          if (po.w <= 0.0) continue;
          po.wxx = po.w * map.normals[mp].nx * map.normals[mp].nx;
          po.wxy = po.w * map.normals[mp].nx * map.normals[mp].ny;
          po.wyy = po.w * map.normals[mp].ny * map.normals[mp].ny;
        }
        pairs.push_back(po);
      }
    }

    for (int j = 0; j < dim; ++j) {
      const double cy = spec.cell_center(j);
      for (int i = 0; i < dim; ++i) {
        const double cx = spec.cell_center(i);
        if (!dedup) {
          for (const auto& po : pairs) {
            if (std::abs(po.dx - cx) <= eps && std::abs(po.dy - cy) <= eps) {
              if (helmert) {
                acc.add_moments(h, i, j, po.wxx, po.wxy, po.wyy);
              } else {
                acc.add_count(h, i, j);
              }
            }
          }
        } else {
          // One per scan point: pairs are grouped by scan index already
          // (generation order), pick the first/best hit per group.
          size_t p = 0;
          while (p < pairs.size()) {
            const int sp = pairs[p].scan_idx;
            bool hit = false;
            double best_w = -1.0;
            int best_mp = 0;
            double wnx = 0.0, wny = 0.0;
            for (; p < pairs.size() && pairs[p].scan_idx == sp; ++p) {
              const auto& po = pairs[p];
              if (std::abs(po.dx - cx) > eps || std::abs(po.dy - cy) > eps) {
                continue;
              }
              hit = true;
              if (po.w > best_w || (po.w == best_w && po.map_idx < best_mp)) {
                best_w = po.w;
                best_mp = po.map_idx;
                wnx = map.normals[po.map_idx].nx;
                wny = map.normals[po.map_idx].ny;
              }
            }
            if (!hit) continue;
            if (helmert) {
              acc.add_moments(h, i, j, best_w * wnx * wnx, best_w * wnx * wny,
                              best_w * wny * wny);
            } else {
              acc.add_count(h, i, j);
            }
          }
        }
      }
    }
  }
  return acc;
}

}  // namespace mcloc
