#include "mcloc/icp.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "mcloc/objectives.hpp"
#include "mcloc/parallel.hpp"

namespace mcloc {

namespace {

// Nearest map point (Euclidean) within `radius` of p, or -1. Expanding box
// search: the common case near convergence stays in a few voxels.
int nearest_within(const VoxelIndex& index, const Point3& p, double radius) {
  double box = std::min(radius, index.voxel_size());
  int best = -1;
  double best_d2 = radius * radius;
  while (true) {
    index.for_each_in_box(p, box, box, box, [&](int idx, const Point3& q) {
      const double dx = q.x - p.x, dy = q.y - p.y, dz = q.z - p.z;
      const double d2 = dx * dx + dy * dy + dz * dz;
      if (d2 < best_d2 || (d2 == best_d2 && best >= 0 && idx < best)) {
        best_d2 = d2;
        best = idx;
      }
    });
    // A hit is final once the searched box encloses its distance ball.
    if (best >= 0 && std::sqrt(best_d2) <= box) return best;
    if (box >= radius) return best;
    box = std::min(box * 2.0, radius);
  }
}

}  // namespace

bool pose_close(const Pose2& pose, const Pose2& truth, double tol_xy,
                double tol_theta) {
  const double dx = pose.tx - truth.tx;
  const double dy = pose.ty - truth.ty;
  return std::hypot(dx, dy) <= tol_xy &&
         std::abs(wrap_angle(pose.theta - truth.theta)) <= tol_theta;
}

IcpResult icp_point_to_plane(const ScanCloud& sensor_scan, const MapCloud& map,
                             const VoxelIndex& map_index, const Pose2& init,
                             const IcpParams& params) {
  if (sensor_scan.points.empty()) {
    throw std::invalid_argument("icp: empty scan");
  }
  map.validate();

  IcpResult result;
  result.final_pose = init.normalized();

  for (int it = 0; it < params.max_iterations; ++it) {
    result.iterations = it + 1;
    const Pose2& pose = result.final_pose;
    const double c = std::cos(pose.theta);
    const double s = std::sin(pose.theta);

    Eigen::Matrix3d n = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    double sq_sum = 0.0;
    double w_sum = 0.0;

    for (size_t sp = 0; sp < sensor_scan.points.size(); ++sp) {
      const Point3& raw = sensor_scan.points[sp];
      // Rotation-only part drives the heading Jacobian.
      const double ux = c * raw.x - s * raw.y;
      const double uy = s * raw.x + c * raw.y;
      const Point3 moved{ux + pose.tx, uy + pose.ty, raw.z};

      const int mi = nearest_within(map_index, moved, params.rejection_radius);
      if (mi < 0) continue;
      const UnitNormal3& nm = map.normals[mi];

      double w = 1.0;
      if (sensor_scan.has_normals()) {
        const UnitNormal3 ns = se2_rotate(pose, sensor_scan.normals[sp]);
        w = match_weight(ns, nm);
        if (w <= 0.0) continue;
      }

      const Point3& m = map.points[mi];
      const double r = (m.x - moved.x) * nm.nx + (m.y - moved.y) * nm.ny +
                       (m.z - moved.z) * nm.nz;
      const Eigen::Vector3d a(nm.nx, nm.ny, nm.nx * -uy + nm.ny * ux);
      n.noalias() += w * a * a.transpose();
      b.noalias() += w * a * r;
      sq_sum += w * r * r;
      w_sum += w;
    }

    if (w_sum <= 0.0 || std::abs(n.determinant()) <= params.det_floor) {
      result.converged = false;
      result.final_rms = w_sum > 0.0 ? std::sqrt(sq_sum / w_sum) : 0.0;
      return result;
    }

    const Eigen::Vector3d delta = n.ldlt().solve(b);
    result.final_pose = Pose2{pose.tx + delta[0], pose.ty + delta[1],
                              wrap_angle(pose.theta + delta[2])};
    result.final_rms = std::sqrt(sq_sum / w_sum);
    if (std::hypot(delta[0], delta[1]) < params.tol_xy &&
        std::abs(delta[2]) < params.tol_theta) {
      result.converged = true;
      return result;
    }
  }
  result.converged = false;
  return result;
}

ConvergenceStudy grid_convergence_study(const ScanCloud& sensor_scan,
                                        const MapCloud& map,
                                        const VoxelIndex& map_index,
                                        const Pose2& truth,
                                        const IcpParams& params, int threads) {
  ConvergenceStudy study;
  study.runs.resize(25);
  parallel_for(25, threads, [&](int run) {
    const int ox = run % 5 - 2;
    const int oy = run / 5 - 2;
    const Pose2 init{truth.tx + ox, truth.ty + oy, truth.theta};
    IcpRun& r = study.runs[run];
    r.offset_x = ox;
    r.offset_y = oy;
    r.result = icp_point_to_plane(sensor_scan, map, map_index, init, params);
    r.result.reached_truth =
        r.result.converged && pose_close(r.result.final_pose, truth);
  });
  for (const auto& run : study.runs) {
    if (!run.result.reached_truth) study.epoch_failed = true;
  }
  return study;
}

}  // namespace mcloc
