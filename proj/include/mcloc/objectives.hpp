#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mcloc/core.hpp"

namespace mcloc {

enum class Objective {
  kCount,    // consensus size: number of matches within epsilon
  kHelmert,  // inverse trace of the point-to-plane translation cofactor
};

/// Singularity floor for 2x2 normal-equation determinants and traces. Below
/// this the translation is unconstrained in some direction and the score is
/// defined as zero.
inline constexpr double kDetFloor = 1e-9;

/// Correspondence weight: cosine between scan and map normal, clamped at
/// zero. An invalid scan normal disables the correspondence.
double match_weight(const UnitNormal3& scan_normal,
                    const UnitNormal3& map_normal);

/// Accumulated 2x2 normal equations N = A^T P A of the per-cell
/// point-to-plane adjustment: sxx = sum w*nx^2, sxy = sum w*nx*ny,
/// syy = sum w*ny^2 over the matched map normals' xy components.
struct NormalEquations2 {
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  int64_t n_obs = 0;

  void add(double nx, double ny, double w) {
    sxx += w * nx * nx;
    sxy += w * nx * ny;
    syy += w * ny * ny;
    ++n_obs;
  }

  double trace() const { return sxx + syy; }
  double det() const { return sxx * syy - sxy * sxy; }
};

/// Score = det(N)/tr(N), which equals 1/tr(N^-1) = 1/(lambda1 + lambda2) of
/// the cofactor matrix without inversion or eigendecomposition. Degenerate
/// sets (det or trace at/below kDetFloor) score zero.
double helmert_score(const NormalEquations2& ne);

/// Reference evaluation through explicit 2x2 inversion and
/// eigendecomposition of the cofactor matrix. Throws std::domain_error when
/// det(N) <= kDetFloor.
double helmert_score_reference(const NormalEquations2& ne);

/// Per-heading objective grids over the translation search space.
/// Count mode holds one integer grid per heading; Helmert mode holds the
/// three moment grids. Accumulators for different headings are independent;
/// merge() implements the deterministic summation contract for parallel
/// partial grids.
class Accumulator {
 public:
  Accumulator(Objective objective, const SearchSpec& spec);

  Objective objective() const { return objective_; }
  int dim() const { return dim_; }
  int heading_count() const { return static_cast<int>(headings_); }

  void add_count(int h, int i, int j, int64_t v = 1) {
    counts_[h](i, j) += v;
  }
  void add_moments(int h, int i, int j, double wxx, double wxy, double wyy) {
    sxx_[h](i, j) += wxx;
    sxy_[h](i, j) += wxy;
    syy_[h](i, j) += wyy;
  }
  void note_contribution(int h) { ++contributions_[h]; }

  const Grid2<int64_t>& count_grid(int h) const { return counts_[h]; }
  int64_t count_at(int h, int i, int j) const { return counts_[h](i, j); }
  NormalEquations2 moments_at(int h, int i, int j) const;

  /// Objective value grid for one heading: raw counts (as double) in Count
  /// mode, det/tr Helmert score per cell in Helmert mode.
  Grid2<double> score_grid(int h) const;

  /// Matched pairs splatted into heading h (scan points in one-per-scan-point
  /// mode). Zero everywhere means an empty consensus.
  int64_t contributions(int h) const { return contributions_[h]; }
  int64_t total_contributions() const;

  /// Element-wise summation merge of a partial accumulator.
  void merge(const Accumulator& other);

 private:
  Objective objective_;
  int dim_ = 0;
  size_t headings_ = 0;
  std::vector<Grid2<int64_t>> counts_;
  std::vector<Grid2<double>> sxx_, sxy_, syy_;
  std::vector<int64_t> contributions_;
};

/// Cell indices (inclusive, empty when lo > hi) whose centers satisfy
/// |center - d| <= eps on one axis. A floor-based candidate range is trimmed
/// with the exact predicate, so the covered set agrees bit-for-bit with a
/// per-cell evaluation of the match condition.
struct StencilRange {
  int lo;
  int hi;
};

inline StencilRange stencil_cell_range(double d, double eps, double cell,
                                       int dim) {
  const int half = dim / 2;
  int lo = static_cast<int>(std::floor((d - eps) / cell)) + half - 1;
  int hi = static_cast<int>(std::floor((d + eps) / cell)) + half + 1;
  lo = std::max(lo, 0);
  hi = std::min(hi, dim - 1);
  while (lo <= hi && std::abs((lo - half) * cell - d) > eps) ++lo;
  while (hi >= lo && std::abs((hi - half) * cell - d) > eps) --hi;
  return {lo, hi};
}

/// Rasterizes one matched pair into heading h of the accumulator. The set of
/// translations t with ||(q - p_rot) - t||inf <= epsilon is an axis-aligned
/// square centered at d = q - p_rot; every cell whose center lies in it (and
/// |d.z| <= epsilon) is incremented (Count) or receives the weighted normal
/// moments of the map normal (Helmert). Returns true when any cell was
/// updated.
bool splat(const Point3& rotated_scan_point, const Point3& map_point,
           const UnitNormal3& map_normal, double weight,
           const SearchSpec& spec, Accumulator& acc, int h);

}  // namespace mcloc
