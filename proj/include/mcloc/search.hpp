#pragma once

#include <vector>

#include "mcloc/core.hpp"
#include "mcloc/index.hpp"
#include "mcloc/objectives.hpp"

namespace mcloc {

struct LocalizationResult {
  Pose2 best_pose;       // offset from the initial pose (world axes)
  GridIndex best_index;  // cell and heading of the maximum
  double best_value = 0.0;
  Accumulator accumulator;
  Objective objective;
  double seconds = 0.0;
};

struct SearchOptions {
  int threads = 0;                // <=0: hardware concurrency
  double index_voxel_size = 0.75;  // used when the index is built internally
};

/// Fills heading h of the accumulator with the objective evaluated at every
/// cell offset for heading angle spec.heading_angle(h). The scan must already
/// be transformed by the initial pose; the candidate rotation acts about
/// (center_x, center_y), the initial sensor position. For each rotated scan
/// point, map neighbors within half_extent + epsilon (xy) and epsilon (z) are
/// retrieved once and splatted.
void evaluate_heading(const ScanCloud& posed_scan, double center_x,
                      double center_y, const MapCloud& map,
                      const VoxelIndex& map_index, int h,
                      const SearchSpec& spec, Accumulator& acc);

/// Exhaustive maximum consensus search over all cells and headings (the
/// global optimum of the discretized objective). Ties are broken by lower
/// heading index, then lower j, then lower i. Throws EmptyConsensusError
/// when no scan-map pair matches anywhere in the search space.
LocalizationResult maximum_consensus(const ScanCloud& sensor_scan,
                                     const Pose2& initial_pose,
                                     const MapCloud& map,
                                     const VoxelIndex& map_index,
                                     const SearchSpec& spec, Objective obj,
                                     const SearchOptions& options = {});

/// Convenience overload that builds the map index internally.
LocalizationResult maximum_consensus(const ScanCloud& sensor_scan,
                                     const Pose2& initial_pose,
                                     const MapCloud& map,
                                     const SearchSpec& spec, Objective obj,
                                     const SearchOptions& options = {});

/// Finds the grid/heading maximum of an accumulator with the search's
/// deterministic tie-breaking. Returns value and index.
std::pair<double, GridIndex> accumulator_argmax(const Accumulator& acc);

}  // namespace mcloc
