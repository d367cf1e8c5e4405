#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mcloc/core.hpp"

namespace mcloc {

/// Voxel-hash index over a point set for exact l-inf neighborhood queries.
/// Immutable after construction; concurrent read-only queries are safe.
class VoxelIndex {
 public:
  VoxelIndex(std::span<const Point3> points, double voxel_size);

  double voxel_size() const { return voxel_size_; }
  size_t size() const { return points_.size(); }
  size_t bucket_count() const { return voxel_starts_.size() - 1; }

  /// Indices of all points with max(|dx|,|dy|,|dz|) <= eps (inclusive).
  std::vector<int> query_linf(const Point3& p, double eps) const;

  /// Indices of all points within the axis-aligned box p +- (hx, hy, hz),
  /// boundaries inclusive.
  std::vector<int> query_box(const Point3& p, double hx, double hy,
                             double hz) const;

  /// Callback form of query_box for hot loops; fn(original_index, point).
  template <typename Fn>
  void for_each_in_box(const Point3& p, double hx, double hy, double hz,
                       Fn&& fn) const {
    const int64_t x0 = voxel_coord(p.x - hx), x1 = voxel_coord(p.x + hx);
    const int64_t y0 = voxel_coord(p.y - hy), y1 = voxel_coord(p.y + hy);
    const int64_t z0 = voxel_coord(p.z - hz), z1 = voxel_coord(p.z + hz);
    for (int64_t zx = x0; zx <= x1; ++zx) {
      for (int64_t zy = y0; zy <= y1; ++zy) {
        for (int64_t zz = z0; zz <= z1; ++zz) {
          const int bucket = find_bucket(pack_key(zx, zy, zz));
          if (bucket < 0) continue;
          for (uint32_t s = voxel_starts_[bucket];
               s < voxel_starts_[bucket + 1]; ++s) {
            const Point3& q = points_[s];
            if (std::abs(q.x - p.x) <= hx && std::abs(q.y - p.y) <= hy &&
                std::abs(q.z - p.z) <= hz) {
              fn(original_index_[s], q);
            }
          }
        }
      }
    }
  }

  /// k nearest points by Euclidean distance, ties broken by lower index.
  /// Throws std::invalid_argument when the cloud has fewer than k points.
  std::vector<int> knn(const Point3& p, int k) const;

 private:
  int64_t voxel_coord(double v) const {
    return static_cast<int64_t>(std::floor(v / voxel_size_));
  }
  static uint64_t pack_key(int64_t x, int64_t y, int64_t z);
  int find_bucket(uint64_t key) const;

  double voxel_size_ = 0.0;
  // Points reordered by voxel; CSR layout over buckets.
  std::vector<Point3> points_;
  std::vector<int> original_index_;
  std::vector<uint32_t> voxel_starts_;
  // Open-addressing table mapping voxel key -> bucket id.
  std::vector<uint64_t> table_keys_;
  std::vector<int32_t> table_vals_;
  uint64_t table_mask_ = 0;
};

/// Per-point plane normals from PCA over the k-neighborhood, oriented toward
/// the viewpoint. Neighborhoods whose covariance is not clearly planar
/// (second eigenvalue below degeneracy_ratio times the largest) yield
/// UnitNormal3::invalid().
std::vector<UnitNormal3> estimate_normals(std::span<const Point3> points,
                                          int k, const Point3& viewpoint,
                                          double degeneracy_ratio = 0.02);

}  // namespace mcloc
