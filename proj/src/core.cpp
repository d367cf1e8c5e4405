#include "mcloc/core.hpp"

#include <cmath>

namespace mcloc {

double wrap_angle(double rad) {
  double a = std::fmod(rad + kPi, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a - kPi;
}

UnitNormal3 UnitNormal3::from_direction(double dx, double dy, double dz) {
  const double n = std::sqrt(dx * dx + dy * dy + dz * dz);
  if (n <= 0.0) return invalid();
  return {dx / n, dy / n, dz / n};
}

bool UnitNormal3::is_unit(double tol) const {
  const double n = std::sqrt(nx * nx + ny * ny + nz * nz);
  return std::abs(n - 1.0) <= tol;
}

Pose2 Pose2::normalized() const { return {tx, ty, wrap_angle(theta)}; }

Pose2 Pose2::inverse() const {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  // R(-theta) * (-t)
  return {-(c * tx + s * ty), -(-s * tx + c * ty), wrap_angle(-theta)};
}

Point3 se2_apply(const Pose2& pose, const Point3& p) {
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  return {c * p.x - s * p.y + pose.tx, s * p.x + c * p.y + pose.ty, p.z};
}

UnitNormal3 se2_rotate(const Pose2& pose, const UnitNormal3& n) {
  if (!n.valid()) return UnitNormal3::invalid();
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  return {c * n.nx - s * n.ny, s * n.nx + c * n.ny, n.nz};
}

Point3 rotate_about(const Point3& p, double cos_t, double sin_t, double cx,
                    double cy) {
  const double dx = p.x - cx;
  const double dy = p.y - cy;
  return {cos_t * dx - sin_t * dy + cx, sin_t * dx + cos_t * dy + cy, p.z};
}

Pose2 apply_offset(const Pose2& initial, const Pose2& offset) {
  return {initial.tx + offset.tx, initial.ty + offset.ty,
          wrap_angle(initial.theta + offset.theta)};
}

int SearchSpec::grid_dim() const {
  return static_cast<int>(std::lround(2.0 * half_extent_xy / cell_size));
}

int SearchSpec::heading_count() const {
  return 2 * static_cast<int>(std::lround(heading_half_range / heading_step)) +
         1;
}

double SearchSpec::heading_angle(int h) const {
  return (h - heading_count() / 2) * heading_step;
}

double SearchSpec::cell_center(int idx) const {
  return (idx - grid_dim() / 2) * cell_size;
}

std::optional<Cell> SearchSpec::cell_of(double tx, double ty) const {
  if (std::abs(tx) > half_extent_xy || std::abs(ty) > half_extent_xy) {
    return std::nullopt;
  }
  const int dim = grid_dim();
  const int half = dim / 2;
  const int i = static_cast<int>(std::floor(tx / cell_size + 0.5)) + half;
  const int j = static_cast<int>(std::floor(ty / cell_size + 0.5)) + half;
  if (i < 0 || i >= dim || j < 0 || j >= dim) return std::nullopt;
  return Cell{i, j};
}

void SearchSpec::validate() const {
  if (!(cell_size > 0.0)) throw std::invalid_argument("cell_size must be > 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (!(heading_step > 0.0)) {
    throw std::invalid_argument("heading_step must be > 0");
  }
  if (!(half_extent_xy > 0.0)) {
    throw std::invalid_argument("half_extent_xy must be > 0");
  }
  if (heading_half_range < 0.0) {
    throw std::invalid_argument("heading_half_range must be >= 0");
  }
  const double cells = 2.0 * half_extent_xy / cell_size;
  if (std::abs(cells - std::lround(cells)) > 1e-9) {
    throw std::invalid_argument(
        "2 * half_extent_xy / cell_size must be an integer cell count");
  }
  const double steps = heading_half_range / heading_step;
  if (std::abs(steps - std::lround(steps)) > 1e-9) {
    throw std::invalid_argument(
        "heading_half_range must be an integer multiple of heading_step");
  }
  if (grid_dim() < 1) throw std::invalid_argument("grid has no cells");
}

void ScanCloud::validate() const {
  if (!normals.empty() && normals.size() != points.size()) {
    throw std::invalid_argument("scan normals/points size mismatch");
  }
}

void MapCloud::validate() const {
  if (normals.size() != points.size()) {
    throw std::invalid_argument("map normals/points size mismatch");
  }
  for (const auto& n : normals) {
    if (!n.is_unit(1e-6)) {
      throw std::invalid_argument("map normals must be unit length");
    }
  }
}

}  // namespace mcloc
