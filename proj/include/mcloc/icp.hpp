#pragma once

#include <vector>

#include "mcloc/core.hpp"
#include "mcloc/index.hpp"

namespace mcloc {

struct IcpParams {
  int max_iterations = 50;
  double tol_xy = 1e-4;      // meters
  double tol_theta = 1e-5;   // radians
  // Correspondences farther than this are rejected. Must exceed the largest
  // expected initialization error; the 5x5 study reaches 2 sqrt(2) m.
  double rejection_radius = 3.0;
  double det_floor = 1e-9;   // 3x3 normal matrix singularity floor
};

struct IcpResult {
  Pose2 final_pose;
  int iterations = 0;
  bool converged = false;     // internal convergence (step below tolerance)
  bool reached_truth = false; // external check, filled by the study
  double final_rms = 0.0;     // meters, point-to-plane residuals
};

/// Final pose within 0.10 m (xy, Euclidean) and 0.5 degrees of the truth.
bool pose_close(const Pose2& pose, const Pose2& truth, double tol_xy = 0.10,
                double tol_theta = deg2rad(0.5));

/// Point-to-plane ICP over (tx, ty, theta). Each iteration matches every
/// transformed scan point to its nearest map point within the rejection
/// radius, weights the pair by the scan/map normal cosine (1 when scan
/// normals are absent), and solves the linearized 3x3 system on the residual
/// <m - s', n_m>. A singular system (det below det_floor) stops with
/// converged = false.
IcpResult icp_point_to_plane(const ScanCloud& sensor_scan, const MapCloud& map,
                             const VoxelIndex& map_index, const Pose2& init,
                             const IcpParams& params = {});

struct IcpRun {
  double offset_x = 0.0;
  double offset_y = 0.0;
  IcpResult result;
};

struct ConvergenceStudy {
  std::vector<IcpRun> runs;  // 25 entries, row-major over the offset grid
  bool epoch_failed = false; // true when any run misses the truth
};

/// The 5x5 convergence study: ICP initialized on a 1 m grid of offsets
/// {-2..2} x {-2..2} around the ground truth (heading at truth), each run
/// checked against the truth pose.
ConvergenceStudy grid_convergence_study(const ScanCloud& sensor_scan,
                                        const MapCloud& map,
                                        const VoxelIndex& map_index,
                                        const Pose2& truth,
                                        const IcpParams& params = {},
                                        int threads = 0);

}  // namespace mcloc
