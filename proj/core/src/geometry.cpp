#include "pointcpr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

#include "pointcpr/errors.hpp"

namespace pointcpr {

PointCloud::PointCloud(std::vector<Point3> points) : points_(std::move(points)) {
  if (points_.empty()) throw ValidationError("point cloud must contain at least one point");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    for (double c : points_[i]) {
      if (!std::isfinite(c)) {
        throw ValidationError("point " + std::to_string(i) + " has a non-finite coordinate");
      }
    }
  }
}

Tensor PointCloud::to_tensor() const {
  std::vector<double> values;
  values.reserve(points_.size() * 3);
  for (const auto& p : points_) values.insert(values.end(), p.begin(), p.end());
  return Tensor({points_.size(), 3}, std::move(values));
}

PointCloud PointCloud::from_tensor(const Tensor& t) {
  if (t.rank() != 2 || t.dim(1) != 3) {
    throw DimensionError("expected an [N, 3] tensor, got " + shape_to_string(t.shape()));
  }
  std::vector<Point3> pts(t.dim(0));
  auto v = t.data();
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {v[3 * i], v[3 * i + 1], v[3 * i + 2]};
  return PointCloud(std::move(pts));
}

PointCloud normalize(const PointCloud& pc, Normalization* transform) {
  Point3 c{0.0, 0.0, 0.0};
  for (const auto& p : pc.points()) {
    for (int a = 0; a < 3; ++a) c[a] += p[a];
  }
  const double n = static_cast<double>(pc.size());
  for (double& v : c) v /= n;

  std::vector<Point3> out(pc.size());
  double radius = 0.0;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    for (int a = 0; a < 3; ++a) out[i][a] = pc[i][a] - c[a];
    radius = std::max(radius, std::sqrt(out[i][0] * out[i][0] + out[i][1] * out[i][1] + out[i][2] * out[i][2]));
  }
  const double s = radius > 0.0 ? radius : 1.0;
  if (radius > 0.0) {
    for (auto& p : out) {
      for (double& v : p) v /= s;
    }
  } else {
    for (auto& p : out) p = {0.0, 0.0, 0.0};
  }
  if (transform != nullptr) *transform = Normalization{c, s};
  return PointCloud(std::move(out));
}

std::vector<std::size_t> farthest_point_sample(const PointCloud& pc, std::size_t m,
                                               std::size_t seed_index) {
  const std::size_t n = pc.size();
  if (m == 0 || m > n) {
    throw ArgumentError("farthest_point_sample: need 1 <= m <= N, got m=" + std::to_string(m) +
                        ", N=" + std::to_string(n));
  }
  if (seed_index >= n) throw ArgumentError("farthest_point_sample: seed index out of range");

  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> selected;
  selected.reserve(m);
  std::size_t current = seed_index;
  for (std::size_t s = 0; s < m; ++s) {
    selected.push_back(current);
    taken[current] = true;
    if (s + 1 == m) break;
    const Point3& last = pc[current];
    std::size_t best = n;
    double best_dist = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      min_dist[i] = std::min(min_dist[i], squared_distance(pc[i], last));
      if (min_dist[i] > best_dist) {
        best_dist = min_dist[i];
        best = i;
      }
    }
    current = best;
  }
  return selected;
}

std::vector<std::size_t> knn_indices(std::span<const Point3> points, std::span<const Point3> queries,
                                     std::size_t k) {
  if (k == 0 || k > points.size()) {
    throw ArgumentError("knn: need 1 <= k <= N, got k=" + std::to_string(k) +
                        ", N=" + std::to_string(points.size()));
  }
  std::vector<std::size_t> out;
  out.reserve(queries.size() * k);
  std::vector<std::pair<double, std::size_t>> cand(points.size());
  for (const Point3& q : queries) {
    for (std::size_t i = 0; i < points.size(); ++i) cand[i] = {squared_distance(points[i], q), i};
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    for (std::size_t j = 0; j < k; ++j) out.push_back(cand[j].second);
  }
  return out;
}

PatchSet knn_group(const PointCloud& pc, std::span<const std::size_t> centers, std::size_t k) {
  if (k > pc.size()) {
    throw ArgumentError("knn_group: k=" + std::to_string(k) + " exceeds cloud size " +
                        std::to_string(pc.size()));
  }
  PatchSet ps;
  ps.num_patches = centers.size();
  ps.patch_size = k;
  ps.center_indices.assign(centers.begin(), centers.end());
  for (std::size_t c : centers) {
    if (c >= pc.size()) throw ArgumentError("knn_group: center index out of range");
    ps.centers.push_back(pc[c]);
  }
  ps.source_indices = knn_indices(pc.points(), ps.centers, k);
  ps.relcoords.resize(ps.source_indices.size());
  for (std::size_t i = 0; i < ps.num_patches; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const Point3& p = pc[ps.source_indices[i * k + j]];
      for (int a = 0; a < 3; ++a) ps.relcoords[i * k + j][a] = p[a] - ps.centers[i][a];
    }
  }
  return ps;
}

PatchSet patchify(const PointCloud& pc, std::size_t num_patches, std::size_t patch_size,
                  std::size_t seed_index) {
  const auto centers = farthest_point_sample(pc, num_patches, seed_index);
  return knn_group(pc, centers, patch_size);
}

namespace {

void check_point_set(const Tensor& t, const char* which) {
  if (t.rank() < 2 || t.shape().back() != 3) {
    throw DimensionError(std::string("chamfer: ") + which + " must have shape [..., N, 3], got " +
                         shape_to_string(t.shape()));
  }
}

std::size_t nearest(const double* p, const double* set, std::size_t count, double* dist) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < count; ++j) {
    const double dx = p[0] - set[3 * j];
    const double dy = p[1] - set[3 * j + 1];
    const double dz = p[2] - set[3 * j + 2];
    const double d = dx * dx + dy * dy + dz * dz;
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  *dist = best_d;
  return best;
}

// One direction of the chamfer sum for a single pair of sets; records
// matches so the backward pass can route gradients.
double directed(const double* from, std::size_t nf, const double* to, std::size_t nt,
                std::size_t* match) {
  double total = 0.0;
  for (std::size_t i = 0; i < nf; ++i) {
    double d = 0.0;
    match[i] = nearest(from + 3 * i, to, nt, &d);
    total += d;
  }
  return total / static_cast<double>(nf);
}

void directed_grad(const double* from, std::size_t nf, const double* to, const std::size_t* match,
                   double weight, double* g_from, double* g_to) {
  const double w = 2.0 * weight / static_cast<double>(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    const std::size_t j = match[i];
    for (int a = 0; a < 3; ++a) {
      const double diff = w * (from[3 * i + a] - to[3 * j + a]);
      if (g_from != nullptr) g_from[3 * i + a] += diff;
      if (g_to != nullptr) g_to[3 * j + a] -= diff;
    }
  }
}

Tensor chamfer_batched(const Tensor& a, const Tensor& b, std::size_t batch, std::size_t na,
                       std::size_t nb) {
  auto ma = std::make_shared<std::vector<std::size_t>>(batch * na);
  auto mb = std::make_shared<std::vector<std::size_t>>(batch * nb);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double total = 0.0;
  for (std::size_t t = 0; t < batch; ++t) {
    total += directed(pa + t * na * 3, na, pb + t * nb * 3, nb, ma->data() + t * na);
    total += directed(pb + t * nb * 3, nb, pa + t * na * 3, na, mb->data() + t * nb);
  }
  total /= static_cast<double>(batch);
  return Tensor::make_result({1}, {total}, {a, b},
                             [a, b, ma, mb, batch, na, nb](const BackwardContext& ctx) {
                               const double w = ctx.out_grad[0] / static_cast<double>(batch);
                               const double* pa = a.data().data();
                               const double* pb = b.data().data();
                               double* ga = ctx.needs(0) ? ctx.input_grads[0].data() : nullptr;
                               double* gb = ctx.needs(1) ? ctx.input_grads[1].data() : nullptr;
                               for (std::size_t t = 0; t < batch; ++t) {
                                 double* gat = ga ? ga + t * na * 3 : nullptr;
                                 double* gbt = gb ? gb + t * nb * 3 : nullptr;
                                 directed_grad(pa + t * na * 3, na, pb + t * nb * 3,
                                               ma->data() + t * na, w, gat, gbt);
                                 directed_grad(pb + t * nb * 3, nb, pa + t * na * 3,
                                               mb->data() + t * nb, w, gbt, gat);
                               }
                             });
}

}  // namespace

Tensor chamfer_l2(const Tensor& a, const Tensor& b) {
  check_point_set(a, "first set");
  check_point_set(b, "second set");
  if (a.rank() != 2 || b.rank() != 2) throw DimensionError("chamfer_l2: expected [N, 3] point sets");
  return chamfer_batched(a, b, 1, a.dim(0), b.dim(0));
}

Tensor chamfer_l2_mean(const Tensor& a, const Tensor& b) {
  check_point_set(a, "first set");
  check_point_set(b, "second set");
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) {
    throw DimensionError("chamfer_l2_mean: expected [B, N, 3] sets with equal B, got " +
                         shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
  }
  return chamfer_batched(a, b, a.dim(0), a.dim(1), b.dim(1));
}

namespace {

template <typename Dist>
double directed_value(std::span<const Point3> from, std::span<const Point3> to, Dist dist) {
  double total = 0.0;
  for (const Point3& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point3& q : to) best = std::min(best, squared_distance(p, q));
    total += dist(best);
  }
  return total / static_cast<double>(from.size());
}

void check_nonempty(std::span<const Point3> a, std::span<const Point3> b) {
  if (a.empty() || b.empty()) throw ArgumentError("chamfer: point sets must be nonempty");
}

}  // namespace

double chamfer_l2(std::span<const Point3> a, std::span<const Point3> b) {
  check_nonempty(a, b);
  auto id = [](double d) { return d; };
  return directed_value(a, b, id) + directed_value(b, a, id);
}

double chamfer_l1(std::span<const Point3> a, std::span<const Point3> b) {
  check_nonempty(a, b);
  auto root = [](double d) { return std::sqrt(d); };
  return 0.5 * (directed_value(a, b, root) + directed_value(b, a, root));
}

}  // namespace pointcpr
