#pragma once

#include "mcloc/core.hpp"
#include "mcloc/objectives.hpp"

namespace mcloc {

/// Reference evaluation of the full objective grids by direct per-cell
/// summation over all scan-map pairs, independent of the voxel index and
/// stencil pipeline. Desk-scale instances only: at most 500 scan points,
/// 5000 map points, and dim*dim*headings <= 21*21*9 poses (throws
/// std::invalid_argument beyond that).
///
/// The match predicate is evaluated in offset form, max(|d.x - cx|,
/// |d.y - cy|, |d.z|) <= epsilon with d = q - R(theta) p, the same
/// arithmetic order the pipeline uses, so Count grids compare exactly.
/// Contribution counters are not filled; compare grids.
Accumulator brute_force_oracle(const ScanCloud& sensor_scan,
                               const Pose2& initial_pose, const MapCloud& map,
                               const SearchSpec& spec, Objective obj);

}  // namespace mcloc
