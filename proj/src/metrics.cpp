#include "mcloc/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mcloc/search.hpp"

namespace mcloc {

namespace {

struct SliceMax {
  double value = 0.0;
  int i = 0;
  int j = 0;
};

SliceMax slice_argmax(const Grid2<double>& slice) {
  SliceMax best{-1.0, 0, 0};
  for (int j = 0; j < slice.dim(); ++j) {
    for (int i = 0; i < slice.dim(); ++i) {
      if (slice(i, j) > best.value) best = {slice(i, j), i, j};
    }
  }
  return best;
}

}  // namespace

std::optional<double> peak_ratio(const Grid2<double>& slice) {
  const SliceMax best = slice_argmax(slice);
  if (best.value <= 0.0) return std::nullopt;
  double second = 0.0;
  for (int j = 0; j < slice.dim(); ++j) {
    for (int i = 0; i < slice.dim(); ++i) {
      if (std::abs(i - best.i) <= 1 && std::abs(j - best.j) <= 1) continue;
      second = std::max(second, slice(i, j));
    }
  }
  return second / best.value;
}

SignificantRay significant_ray(const Grid2<double>& slice) {
  const SliceMax best = slice_argmax(slice);
  SignificantRay ray{best.i, best.j, 1.0, 0.0};
  if (best.value <= 0.0) return ray;

  const double threshold = 0.5 * best.value;
  double sw = 0.0, mx = 0.0, my = 0.0;
  int support = 0;
  for (int j = 0; j < slice.dim(); ++j) {
    for (int i = 0; i < slice.dim(); ++i) {
      const double v = slice(i, j);
      if (v < threshold) continue;
      sw += v;
      mx += v * i;
      my += v * j;
      ++support;
    }
  }
  if (support < 2 || sw <= 0.0) return ray;
  mx /= sw;
  my /= sw;

  double cxx = 0.0, cxy = 0.0, cyy = 0.0;
  for (int j = 0; j < slice.dim(); ++j) {
    for (int i = 0; i < slice.dim(); ++i) {
      const double v = slice(i, j);
      if (v < threshold) continue;
      const double dx = i - mx;
      const double dy = j - my;
      cxx += v * dx * dx;
      cxy += v * dx * dy;
      cyy += v * dy * dy;
    }
  }
  Eigen::Matrix2d cov;
  cov << cxx, cxy, cxy, cyy;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  Eigen::Vector2d dir = eig.eigenvectors().col(1);  // largest eigenvalue
  // Canonical sign for determinism.
  if (dir.x() < 0.0 || (dir.x() == 0.0 && dir.y() < 0.0)) dir = -dir;
  ray.dir_x = dir.x();
  ray.dir_y = dir.y();
  return ray;
}

std::optional<double> kurtosis_along_ray(const Grid2<double>& slice,
                                         const SignificantRay& ray) {
  const int dim = slice.dim();
  std::vector<std::pair<double, double>> profile;  // (position, value)
  for (int sense : {-1, +1}) {
    for (int step = (sense < 0 ? 1 : 0);; ++step) {
      const double s = sense * static_cast<double>(step);
      const int i = static_cast<int>(std::lround(ray.anchor_i + s * ray.dir_x));
      const int j = static_cast<int>(std::lround(ray.anchor_j + s * ray.dir_y));
      if (i < 0 || i >= dim || j < 0 || j >= dim) break;
      profile.emplace_back(s, slice(i, j));
    }
  }
  if (profile.size() < 5) return std::nullopt;

  double mass = 0.0;
  for (const auto& [s, v] : profile) mass += v;
  if (mass <= 0.0) return std::nullopt;

  double mean = 0.0;
  for (const auto& [s, v] : profile) mean += v / mass * s;
  double mu2 = 0.0, mu4 = 0.0;
  for (const auto& [s, v] : profile) {
    const double d = s - mean;
    mu2 += v / mass * d * d;
    mu4 += v / mass * d * d * d * d;
  }
  if (mu2 <= 0.0) return std::nullopt;
  return mu4 / (mu2 * mu2);
}

std::optional<double> kl_vs_laplace(const Grid2<double>& slice,
                                    double scale_cells) {
  const SliceMax best = slice_argmax(slice);
  if (best.value <= 0.0) return std::nullopt;
  const int dim = slice.dim();

  double mass = 0.0;
  for (double v : slice.data()) mass += v;

  // Both distributions get the same probability floor, so a grid shaped
  // exactly like the reference scores zero and deep Laplace tails cannot
  // underflow the log.
  constexpr double kFloor = 1e-12;
  std::vector<double> p(slice.data().size());
  double p_mass = 0.0;
  for (size_t c = 0; c < p.size(); ++c) {
    p[c] = std::max(slice.data()[c] / mass, kFloor);
    p_mass += p[c];
  }

  double q_mass = 0.0;
  std::vector<double> q(p.size());
  for (int j = 0; j < dim; ++j) {
    for (int i = 0; i < dim; ++i) {
      const double l1 = std::abs(i - best.i) + std::abs(j - best.j);
      q[static_cast<size_t>(j) * dim + i] =
          std::max(std::exp(-l1 / scale_cells), kFloor);
      q_mass += q[static_cast<size_t>(j) * dim + i];
    }
  }

  double kl = 0.0;
  for (size_t c = 0; c < p.size(); ++c) {
    const double pc = p[c] / p_mass;
    kl += pc * std::log(pc / (q[c] / q_mass));
  }
  return kl;
}

std::optional<int> plateau_distance(const Accumulator& acc, double fraction) {
  const auto [best, best_index] = accumulator_argmax(acc);
  if (best <= 0.0) return std::nullopt;
  const double threshold = fraction * best;
  int plateau = 0;
  for (int h = 0; h < acc.heading_count(); ++h) {
    const Grid2<double> grid = acc.score_grid(h);
    for (int j = 0; j < acc.dim(); ++j) {
      for (int i = 0; i < acc.dim(); ++i) {
        if (grid(i, j) < threshold) continue;
        plateau = std::max(plateau, std::max(std::abs(i - best_index.i),
                                             std::abs(j - best_index.j)));
      }
    }
  }
  return plateau;
}

EpochMetrics compute_metrics(const Accumulator& acc) {
  EpochMetrics m;
  const auto [best, best_index] = accumulator_argmax(acc);
  if (best <= 0.0) return m;
  const Grid2<double> slice = acc.score_grid(best_index.h);
  m.peak_ratio = peak_ratio(slice);
  m.ray = significant_ray(slice);
  m.kurtosis = kurtosis_along_ray(slice, m.ray);
  m.kl_divergence = kl_vs_laplace(slice);
  m.plateau_distance = plateau_distance(acc);
  return m;
}

}  // namespace mcloc
