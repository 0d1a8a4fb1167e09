#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "pointcpr/tensor.hpp"

namespace pointcpr {

using Point3 = std::array<double, 3>;

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

/// N x 3 coordinates; N >= 1 and every coordinate finite.
class PointCloud {
 public:
  explicit PointCloud(std::vector<Point3> points);

  std::size_t size() const { return points_.size(); }
  const std::vector<Point3>& points() const { return points_; }
  const Point3& operator[](std::size_t i) const { return points_[i]; }

  Tensor to_tensor() const;
  static PointCloud from_tensor(const Tensor& t);

 private:
  std::vector<Point3> points_;
};

struct Normalization {
  Point3 centroid{0.0, 0.0, 0.0};
  double scale = 1.0;
};

/// Zero centroid, max point norm 1. An all-identical cloud maps to zeros
/// with scale 1.
PointCloud normalize(const PointCloud& pc, Normalization* transform = nullptr);

/// Greedy max-min subset. Distances are squared Euclidean; ties go to the
/// lower index. Returns m distinct indices, the first being `seed_index`.
std::vector<std::size_t> farthest_point_sample(const PointCloud& pc, std::size_t m,
                                               std::size_t seed_index = 0);

/// For every query, the k nearest `points` ordered by (squared distance,
/// index). Flat [queries.size() * k].
std::vector<std::size_t> knn_indices(std::span<const Point3> points, std::span<const Point3> queries,
                                     std::size_t k);

/// M patches of K points each. relcoords[i*K + j] is
/// parent[source[i*K + j]] - centers[i].
struct PatchSet {
  std::size_t num_patches = 0;
  std::size_t patch_size = 0;
  std::vector<Point3> centers;
  std::vector<std::size_t> center_indices;
  std::vector<Point3> relcoords;
  std::vector<std::size_t> source_indices;

  const Point3& relcoord(std::size_t patch, std::size_t j) const {
    return relcoords[patch * patch_size + j];
  }
};

PatchSet knn_group(const PointCloud& pc, std::span<const std::size_t> centers, std::size_t k);

/// FPS followed by knn_group.
PatchSet patchify(const PointCloud& pc, std::size_t num_patches, std::size_t patch_size,
                  std::size_t seed_index = 0);

/// (1/|A|) sum_a min_b |a-b|^2 + (1/|B|) sum_b min_a |a-b|^2 for
/// a: [Na, 3], b: [Nb, 3]. Differentiable in both arguments.
Tensor chamfer_l2(const Tensor& a, const Tensor& b);

/// Batched chamfer_l2 over a: [B, Na, 3], b: [B, Nb, 3], averaged over B.
Tensor chamfer_l2_mean(const Tensor& a, const Tensor& b);

double chamfer_l2(std::span<const Point3> a, std::span<const Point3> b);

/// 0.5 * [(1/|A|) sum_a min_b |a-b| + (1/|B|) sum_b min_a |a-b|].
double chamfer_l1(std::span<const Point3> a, std::span<const Point3> b);

}  // namespace pointcpr
