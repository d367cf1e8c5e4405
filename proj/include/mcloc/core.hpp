#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcloc {

inline constexpr double kPi = std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle to [-pi, pi).
double wrap_angle(double rad);

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Unit direction vector. A zero vector is the "invalid" sentinel used for
/// points whose normal could not be estimated (degenerate neighborhoods).
struct UnitNormal3 {
  double nx = 0.0;
  double ny = 0.0;
  double nz = 0.0;

  static UnitNormal3 invalid() { return {0.0, 0.0, 0.0}; }

  /// Builds a unit normal from an arbitrary non-zero direction.
  static UnitNormal3 from_direction(double dx, double dy, double dz);

  bool valid() const { return nx * nx + ny * ny + nz * nz > 0.25; }
  bool is_unit(double tol = 1e-9) const;
};

inline double dot(const UnitNormal3& a, const UnitNormal3& b) {
  return a.nx * b.nx + a.ny * b.ny + a.nz * b.nz;
}

/// Planar pose: xy translation in meters, heading in radians in [-pi, pi).
struct Pose2 {
  double tx = 0.0;
  double ty = 0.0;
  double theta = 0.0;

  static Pose2 identity() { return {}; }
  Pose2 normalized() const;
  Pose2 inverse() const;
};

/// Applies the 3-DoF rigid transform: xy is rotated and translated, z passes
/// through unchanged.
Point3 se2_apply(const Pose2& pose, const Point3& p);

/// Rotates a direction by the pose heading (translation does not apply).
UnitNormal3 se2_rotate(const Pose2& pose, const UnitNormal3& n);

/// Rotates p around the vertical axis through (cx, cy) by the angle whose
/// cosine/sine are given. Shared by the search pipeline and its oracle so both
/// produce bit-identical rotated coordinates.
Point3 rotate_about(const Point3& p, double cos_t, double sin_t, double cx,
                    double cy);

/// Composes an initial pose with a search offset: translation adds in world
/// axes, heading adds (the offset rotation acts about the initial position).
Pose2 apply_offset(const Pose2& initial, const Pose2& offset);

struct Cell {
  int i = 0;  // x-axis cell index
  int j = 0;  // y-axis cell index
};

struct GridIndex {
  int i = 0;
  int j = 0;
  int h = 0;  // heading index
};

enum class MatchMode {
  kAllPairs,         // every scan-map pair within epsilon counts
  kOnePerScanPoint,  // a scan point contributes at most once per cell
};

/// Discretization of the pose search space. Cell centers lie at integer
/// multiples of cell_size per axis, so the center cell of the default
/// 100x100 grid is (50, 50) with center exactly (0, 0). Cells cover the
/// half-open square [center - cell/2, center + cell/2) per axis.
struct SearchSpec {
  double half_extent_xy = 3.0;
  double cell_size = 0.06;
  double heading_half_range = deg2rad(2.0);
  double heading_step = deg2rad(0.5);
  double epsilon = 0.06;
  MatchMode match_mode = MatchMode::kAllPairs;

  int grid_dim() const;
  int heading_count() const;
  /// Heading angle of index h; the middle index is 0 rad.
  double heading_angle(int h) const;
  /// Center coordinate (one axis) of cell index idx.
  double cell_center(int idx) const;
  /// Cell containing the translation offset (tx, ty), or nullopt when the
  /// offset exceeds half_extent_xy on either axis (or falls in the half-cell
  /// sliver past the last cell on the positive edge).
  std::optional<Cell> cell_of(double tx, double ty) const;
  /// Throws std::invalid_argument when the discretization is inconsistent.
  void validate() const;
};

/// LiDAR points in the sensor frame (z already vertically aligned with the
/// map). Normals, when present, parallel the points and may contain invalid
/// entries for degenerate neighborhoods.
struct ScanCloud {
  std::vector<Point3> points;
  std::vector<UnitNormal3> normals;

  bool has_normals() const { return !normals.empty(); }
  void validate() const;
};

/// Globally referenced reference points, one unit normal per point.
struct MapCloud {
  std::vector<Point3> points;
  std::vector<UnitNormal3> normals;

  void validate() const;
};

/// Square 2-D array addressed as (i, j) = (x index, y index).
template <typename T>
class Grid2 {
 public:
  Grid2() = default;
  explicit Grid2(int dim, T fill = T{})
      : dim_(dim), cells_(static_cast<size_t>(dim) * dim, fill) {}

  int dim() const { return dim_; }
  bool empty() const { return cells_.empty(); }

  T& operator()(int i, int j) { return cells_[idx(i, j)]; }
  const T& operator()(int i, int j) const { return cells_[idx(i, j)]; }

  const std::vector<T>& data() const { return cells_; }
  std::vector<T>& data() { return cells_; }

 private:
  size_t idx(int i, int j) const {
    return static_cast<size_t>(j) * dim_ + i;
  }

  int dim_ = 0;
  std::vector<T> cells_;
};

struct EmptyConsensusError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mcloc
