#include "mcloc/index.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <unordered_map>

namespace mcloc {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr uint64_t kEmptyKey = ~0ULL;

}  // namespace

uint64_t VoxelIndex::pack_key(int64_t x, int64_t y, int64_t z) {
  // 21 bits per axis, offset to keep coordinates positive.
  constexpr int64_t kOffset = 1 << 20;
  constexpr uint64_t kMask = (1 << 21) - 1;
  return ((static_cast<uint64_t>(x + kOffset) & kMask) << 42) |
         ((static_cast<uint64_t>(y + kOffset) & kMask) << 21) |
         (static_cast<uint64_t>(z + kOffset) & kMask);
}

VoxelIndex::VoxelIndex(std::span<const Point3> points, double voxel_size)
    : voxel_size_(voxel_size) {
  if (points.empty()) throw std::invalid_argument("VoxelIndex: empty cloud");
  if (!(voxel_size > 0.0)) {
    throw std::invalid_argument("VoxelIndex: voxel_size must be > 0");
  }

  const size_t n = points.size();
  std::vector<uint64_t> keys(n);
  std::unordered_map<uint64_t, int32_t> bucket_of;
  bucket_of.reserve(n);
  for (size_t idx = 0; idx < n; ++idx) {
    keys[idx] = pack_key(voxel_coord(points[idx].x), voxel_coord(points[idx].y),
                         voxel_coord(points[idx].z));
    bucket_of.emplace(keys[idx], 0);
  }
  int32_t next_id = 0;
  for (auto& [key, id] : bucket_of) id = next_id++;

  const size_t buckets = bucket_of.size();
  std::vector<uint32_t> counts(buckets, 0);
  for (size_t idx = 0; idx < n; ++idx) ++counts[bucket_of[keys[idx]]];

  voxel_starts_.assign(buckets + 1, 0);
  for (size_t b = 0; b < buckets; ++b) {
    voxel_starts_[b + 1] = voxel_starts_[b] + counts[b];
  }

  points_.resize(n);
  original_index_.resize(n);
  std::vector<uint32_t> cursor(voxel_starts_.begin(), voxel_starts_.end() - 1);
  for (size_t idx = 0; idx < n; ++idx) {
    const uint32_t slot = cursor[bucket_of[keys[idx]]]++;
    points_[slot] = points[idx];
    original_index_[slot] = static_cast<int>(idx);
  }

  // Freeze the key -> bucket map into an open-addressing table.
  size_t cap = 16;
  while (cap < buckets * 2) cap <<= 1;
  table_keys_.assign(cap, kEmptyKey);
  table_vals_.assign(cap, -1);
  table_mask_ = cap - 1;
  for (const auto& [key, id] : bucket_of) {
    uint64_t slot = splitmix64(key) & table_mask_;
    while (table_keys_[slot] != kEmptyKey) slot = (slot + 1) & table_mask_;
    table_keys_[slot] = key;
    table_vals_[slot] = id;
  }
}

int VoxelIndex::find_bucket(uint64_t key) const {
  uint64_t slot = splitmix64(key) & table_mask_;
  while (true) {
    if (table_keys_[slot] == key) return table_vals_[slot];
    if (table_keys_[slot] == kEmptyKey) return -1;
    slot = (slot + 1) & table_mask_;
  }
}

std::vector<int> VoxelIndex::query_box(const Point3& p, double hx, double hy,
                                       double hz) const {
  std::vector<int> out;
  for_each_in_box(p, hx, hy, hz, [&](int idx, const Point3&) {
    out.push_back(idx);
  });
  return out;
}

std::vector<int> VoxelIndex::query_linf(const Point3& p, double eps) const {
  return query_box(p, eps, eps, eps);
}

std::vector<int> VoxelIndex::knn(const Point3& p, int k) const {
  if (k <= 0) throw std::invalid_argument("knn: k must be positive");
  if (static_cast<size_t>(k) > points_.size()) {
    throw std::invalid_argument("knn: cloud has fewer than k points");
  }

  std::vector<std::pair<double, int>> found;  // (squared distance, index)
  double radius = voxel_size_;
  while (true) {
    found.clear();
    for_each_in_box(p, radius, radius, radius, [&](int idx, const Point3& q) {
      const double dx = q.x - p.x, dy = q.y - p.y, dz = q.z - p.z;
      found.emplace_back(dx * dx + dy * dy + dz * dz, idx);
    });
    if (found.size() >= static_cast<size_t>(k)) {
      std::nth_element(found.begin(), found.begin() + (k - 1), found.end());
      const double kth = std::sqrt(found[k - 1].first);
      // The box must enclose the k-th distance ball to rule out closer
      // points in unvisited voxels.
      if (kth <= radius) break;
      radius = kth;
    } else {
      radius *= 2.0;
    }
  }

  std::sort(found.begin(), found.end());
  found.resize(k);
  std::vector<int> out(k);
  for (int i = 0; i < k; ++i) out[i] = found[i].second;
  return out;
}

std::vector<UnitNormal3> estimate_normals(std::span<const Point3> points,
                                          int k, const Point3& viewpoint,
                                          double degeneracy_ratio) {
  if (k < 3) throw std::invalid_argument("estimate_normals: k must be >= 3");
  if (points.size() < static_cast<size_t>(k)) {
    throw std::invalid_argument("estimate_normals: cloud smaller than k");
  }

  // Voxel size tuned to the expected neighborhood radius; correctness does
  // not depend on it.
  double lo_x = points[0].x, hi_x = points[0].x;
  double lo_y = points[0].y, hi_y = points[0].y;
  for (const auto& p : points) {
    lo_x = std::min(lo_x, p.x); hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y); hi_y = std::max(hi_y, p.y);
  }
  const double extent = std::max({hi_x - lo_x, hi_y - lo_y, 1e-3});
  const double voxel =
      std::max(1e-3, extent * std::sqrt(static_cast<double>(k) /
                                        static_cast<double>(points.size())));
  VoxelIndex index(points, voxel);

  std::vector<UnitNormal3> normals(points.size(), UnitNormal3::invalid());
  for (size_t idx = 0; idx < points.size(); ++idx) {
    const std::vector<int> nb = index.knn(points[idx], k);

    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int j : nb) mean += Eigen::Vector3d(points[j].x, points[j].y,
                                             points[j].z);
    mean /= static_cast<double>(k);

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int j : nb) {
      const Eigen::Vector3d d =
          Eigen::Vector3d(points[j].x, points[j].y, points[j].z) - mean;
      cov += d * d.transpose();
    }

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
    if (evals[2] <= 1e-18 || evals[1] <= degeneracy_ratio * evals[2]) {
      continue;  // coincident or collinear neighborhood: no plane
    }
    Eigen::Vector3d n = eig.eigenvectors().col(0);
    const Eigen::Vector3d to_view(viewpoint.x - points[idx].x,
                                  viewpoint.y - points[idx].y,
                                  viewpoint.z - points[idx].z);
    if (n.dot(to_view) < 0.0) n = -n;
    normals[idx] = {n.x(), n.y(), n.z()};
  }
  return normals;
}

}  // namespace mcloc
