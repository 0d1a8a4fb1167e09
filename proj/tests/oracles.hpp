#pragma once

// Independent reference implementations used by the tests. They are
// deliberately naive: full sorts, explicit loops, no shared code with
// the library beyond the Tensor container.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "pointcpr/geometry.hpp"
#include "pointcpr/tensor.hpp"

namespace oracle {

using pointcpr::Point3;
using pointcpr::Tensor;

inline double dist2(const Point3& a, const Point3& b) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// O(N^2 m) greedy max-min: recompute every candidate's distance to the
// whole selected set from scratch at each round.
inline std::vector<std::size_t> fps(const std::vector<Point3>& pts, std::size_t m, std::size_t seed) {
  std::vector<std::size_t> sel{seed};
  while (sel.size() < m) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::find(sel.begin(), sel.end(), i) != sel.end()) continue;
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t s : sel) d = std::min(d, dist2(pts[i], pts[s]));
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    sel.push_back(best);
  }
  return sel;
}

// Full sort of every point by (distance, index).
inline std::vector<std::size_t> knn(const std::vector<Point3>& pts, const Point3& q, std::size_t k) {
  std::vector<std::size_t> idx(pts.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double da = dist2(pts[a], q), db = dist2(pts[b], q);
    return da != db ? da < db : a < b;
  });
  idx.resize(k);
  return idx;
}

inline double directional(const std::vector<Point3>& a, const std::vector<Point3>& b, bool squared) {
  double total = 0.0;
  for (const auto& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : b) best = std::min(best, dist2(p, q));
    total += squared ? best : std::sqrt(best);
  }
  return total / static_cast<double>(a.size());
}

inline double chamfer_l2(const std::vector<Point3>& a, const std::vector<Point3>& b) {
  return directional(a, b, true) + directional(b, a, true);
}

inline double chamfer_l1(const std::vector<Point3>& a, const std::vector<Point3>& b) {
  return 0.5 * (directional(a, b, false) + directional(b, a, false));
}

// Central differences of scalar f with respect to every element of `x`.
inline std::vector<double> numeric_gradient(const std::function<double()>& f, Tensor& x, double h = 1e-5) {
  auto data = x.mutable_data();
  std::vector<double> g(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double keep = data[i];
    data[i] = keep + h;
    const double up = f();
    data[i] = keep - h;
    const double down = f();
    data[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max|a - n| / max(max|a|, max|n|, floor)
inline double relative_error(std::span<const double> a, std::span<const double> n, double floor = 1e-9) {
  double diff = 0.0, scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - n[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(n[i])});
  }
  return diff / scale;
}

inline std::vector<Point3> random_points(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Point3> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

inline Tensor random_tensor(pointcpr::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(pointcpr::shape_numel(shape));
  for (double& x : v) x = g(rng);
  return Tensor(std::move(shape), std::move(v));
}

inline bool bit_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

}  // namespace oracle
