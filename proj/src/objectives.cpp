#include "mcloc/objectives.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace mcloc {

double match_weight(const UnitNormal3& scan_normal,
                    const UnitNormal3& map_normal) {
  if (!scan_normal.valid()) return 0.0;
  return std::max(0.0, dot(scan_normal, map_normal));
}

double helmert_score(const NormalEquations2& ne) {
  const double det = ne.det();
  const double tr = ne.trace();
  if (det <= kDetFloor || tr <= kDetFloor) return 0.0;
  return det / tr;
}

double helmert_score_reference(const NormalEquations2& ne) {
  if (ne.det() <= kDetFloor) {
    throw std::domain_error("helmert_score_reference: singular normal matrix");
  }
  Eigen::Matrix2d n;
  n << ne.sxx, ne.sxy, ne.sxy, ne.syy;
  const Eigen::Matrix2d q = n.inverse();  // cofactor matrix of the translation
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(q);
  return 1.0 / (eig.eigenvalues()[0] + eig.eigenvalues()[1]);
}

Accumulator::Accumulator(Objective objective, const SearchSpec& spec)
    : objective_(objective),
      dim_(spec.grid_dim()),
      headings_(static_cast<size_t>(spec.heading_count())) {
  contributions_.assign(headings_, 0);
  if (objective_ == Objective::kCount) {
    counts_.assign(headings_, Grid2<int64_t>(dim_));
  } else {
    sxx_.assign(headings_, Grid2<double>(dim_));
    sxy_.assign(headings_, Grid2<double>(dim_));
    syy_.assign(headings_, Grid2<double>(dim_));
  }
}

NormalEquations2 Accumulator::moments_at(int h, int i, int j) const {
  NormalEquations2 ne;
  ne.sxx = sxx_[h](i, j);
  ne.sxy = sxy_[h](i, j);
  ne.syy = syy_[h](i, j);
  return ne;
}

Grid2<double> Accumulator::score_grid(int h) const {
  Grid2<double> out(dim_);
  if (objective_ == Objective::kCount) {
    for (int j = 0; j < dim_; ++j) {
      for (int i = 0; i < dim_; ++i) {
        out(i, j) = static_cast<double>(counts_[h](i, j));
      }
    }
  } else {
    for (int j = 0; j < dim_; ++j) {
      for (int i = 0; i < dim_; ++i) {
        out(i, j) = helmert_score(moments_at(h, i, j));
      }
    }
  }
  return out;
}

int64_t Accumulator::total_contributions() const {
  int64_t total = 0;
  for (int64_t c : contributions_) total += c;
  return total;
}

void Accumulator::merge(const Accumulator& other) {
  for (size_t h = 0; h < headings_; ++h) {
    contributions_[h] += other.contributions_[h];
    if (objective_ == Objective::kCount) {
      auto& dst = counts_[h].data();
      const auto& src = other.counts_[h].data();
      for (size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    } else {
      for (size_t c = 0; c < sxx_[h].data().size(); ++c) {
        sxx_[h].data()[c] += other.sxx_[h].data()[c];
        sxy_[h].data()[c] += other.sxy_[h].data()[c];
        syy_[h].data()[c] += other.syy_[h].data()[c];
      }
    }
  }
}

bool splat(const Point3& rotated_scan_point, const Point3& map_point,
           const UnitNormal3& map_normal, double weight,
           const SearchSpec& spec, Accumulator& acc, int h) {
  const double dx = map_point.x - rotated_scan_point.x;
  const double dy = map_point.y - rotated_scan_point.y;
  const double dz = map_point.z - rotated_scan_point.z;
  if (std::abs(dz) > spec.epsilon) return false;

  const int dim = acc.dim();
  const StencilRange ri =
      stencil_cell_range(dx, spec.epsilon, spec.cell_size, dim);
  if (ri.lo > ri.hi) return false;
  const StencilRange rj =
      stencil_cell_range(dy, spec.epsilon, spec.cell_size, dim);
  if (rj.lo > rj.hi) return false;

  if (acc.objective() == Objective::kCount) {
    for (int j = rj.lo; j <= rj.hi; ++j) {
      for (int i = ri.lo; i <= ri.hi; ++i) acc.add_count(h, i, j);
    }
  } else {
    if (weight <= 0.0) return false;
    const double wxx = weight * map_normal.nx * map_normal.nx;
    const double wxy = weight * map_normal.nx * map_normal.ny;
    const double wyy = weight * map_normal.ny * map_normal.ny;
    for (int j = rj.lo; j <= rj.hi; ++j) {
      for (int i = ri.lo; i <= ri.hi; ++i) acc.add_moments(h, i, j, wxx, wxy, wyy);
    }
  }
  acc.note_contribution(h);
  return true;
}

}  // namespace mcloc
