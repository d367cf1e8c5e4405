#pragma once

#include <optional>

#include "mcloc/core.hpp"
#include "mcloc/objectives.hpp"

namespace mcloc {

/// Dominant high-consensus direction in one heading slice, anchored at the
/// argmax cell.
struct SignificantRay {
  int anchor_i = 0;
  int anchor_j = 0;
  double dir_x = 1.0;  // unit direction in cell coordinates
  double dir_y = 0.0;
};

/// Distinctness measures of one epoch's search space.
struct EpochMetrics {
  std::optional<double> peak_ratio;     // second / first, in [0, 1]
  std::optional<double> kurtosis;       // non-excess, along the significant ray
  std::optional<double> kl_divergence;  // nats, vs. Laplace with b = 1 cell
  std::optional<int> plateau_distance;  // cells, across all headings
  SignificantRay ray;
};

/// Ratio of the second highest to the highest value in the grid, the second
/// peak being taken outside the 8-neighborhood of the argmax (adjacent cells
/// of one physical peak measure discretization, not ambiguity). Lower is more
/// distinct. nullopt on an all-zero grid.
std::optional<double> peak_ratio(const Grid2<double>& slice);

/// Principal direction of the score-weighted coordinates of cells at or above
/// 50% of the slice maximum, anchored at the argmax cell. Falls back to the
/// x-axis when fewer than two cells qualify.
SignificantRay significant_ray(const Grid2<double>& slice);

/// Non-excess Pearson kurtosis (mu4 / mu2^2) of the profile sampled by
/// nearest cell at unit-cell steps along the ray across the full grid,
/// treating the normalized profile as a distribution over position.
/// nullopt when fewer than 5 cells are sampled, the profile has zero mass,
/// or all mass sits in one sample.
std::optional<double> kurtosis_along_ray(const Grid2<double>& slice,
                                         const SignificantRay& ray);

/// Kullback-Leibler divergence (nats) of the normalized grid against a
/// separable 2-D Laplace distribution centered at the argmax with scale
/// b = scale_cells. Probabilities are floored at 1e-12 and renormalized.
/// nullopt on an all-zero grid.
std::optional<double> kl_vs_laplace(const Grid2<double>& slice,
                                    double scale_cells = 1.0);

/// Largest Chebyshev cell distance from the global argmax (over all headings)
/// to any cell of any heading reaching at least `fraction` of the maximum.
/// nullopt when every cell of every heading is zero.
std::optional<int> plateau_distance(const Accumulator& acc,
                                    double fraction = 0.9);

/// Metrics of a finished search: ratio/ray/kurtosis/KL on the best heading's
/// slice, plateau across all headings.
EpochMetrics compute_metrics(const Accumulator& acc);

}  // namespace mcloc
