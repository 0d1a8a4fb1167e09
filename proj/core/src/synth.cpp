#include "pointcpr/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "pointcpr/errors.hpp"

namespace pointcpr {

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::sphere: return "sphere";
    case ShapeKind::cube: return "cube";
    case ShapeKind::cylinder: return "cylinder";
    case ShapeKind::plane: return "plane";
    case ShapeKind::torus: return "torus";
  }
  return "?";
}

ShapeKind parse_shape(std::string_view name) {
  for (ShapeKind k : {ShapeKind::sphere, ShapeKind::cube, ShapeKind::cylinder, ShapeKind::plane, ShapeKind::torus}) {
    if (name == to_string(k)) return k;
  }
  throw ArgumentError("unknown shape class '" + std::string(name) +
                      "' (expected sphere, cube, cylinder, plane or torus)");
}

namespace {

constexpr double kTorusMajor = 1.0;
constexpr double kTorusMinor = 0.35;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Point3 sphere_point(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    Point3 p{g(rng), g(rng), g(rng)};
    const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    if (r < 1e-12) continue;
    return {p[0] / r, p[1] / r, p[2] / r};
  }
}

Point3 cube_point(std::mt19937_64& rng) {
  const auto face = std::uniform_int_distribution<int>(0, 5)(rng);
  const double u = uniform(rng, -1.0, 1.0);
  const double v = uniform(rng, -1.0, 1.0);
  const double s = face % 2 == 0 ? 1.0 : -1.0;
  switch (face / 2) {
    case 0: return {s, u, v};
    case 1: return {u, s, v};
    default: return {u, v, s};
  }
}

Point3 cylinder_point(std::mt19937_64& rng) {
  // Lateral area 4*pi, each cap pi.
  const double pick = uniform(rng, 0.0, 6.0);
  const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  if (pick < 4.0) return {std::cos(theta), std::sin(theta), uniform(rng, -1.0, 1.0)};
  const double r = std::sqrt(uniform(rng, 0.0, 1.0));
  return {r * std::cos(theta), r * std::sin(theta), pick < 5.0 ? 1.0 : -1.0};
}

Point3 torus_point(std::mt19937_64& rng) {
  for (;;) {
    const double u = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double v = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double ring = kTorusMajor + kTorusMinor * std::cos(v);
    if (uniform(rng, 0.0, kTorusMajor + kTorusMinor) > ring) continue;
    return {ring * std::cos(u), ring * std::sin(u), kTorusMinor * std::sin(v)};
  }
}

}  // namespace

std::vector<Point3> sample_surface(ShapeKind kind, std::size_t n, std::mt19937_64& rng) {
  std::vector<Point3> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (kind) {
      case ShapeKind::sphere: out.push_back(sphere_point(rng)); break;
      case ShapeKind::cube: out.push_back(cube_point(rng)); break;
      case ShapeKind::cylinder: out.push_back(cylinder_point(rng)); break;
      case ShapeKind::plane: out.push_back({uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0), 0.0}); break;
      case ShapeKind::torus: out.push_back(torus_point(rng)); break;
    }
  }
  return out;
}

std::vector<Point3> random_rotation(std::span<const Point3> points, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  double q[4];
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& c : q) {
      c = g(rng);
      norm += c * c;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  const double w = q[0] / norm, x = q[1] / norm, y = q[2] / norm, z = q[3] / norm;
  const double r[3][3] = {{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
                          {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
                          {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}};
  std::vector<Point3> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    out.push_back({r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2], r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2],
                   r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2]});
  }
  return out;
}

std::vector<LabeledCloud> synth_dataset(const SynthSpec& spec) {
  if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise)) {
    throw ArgumentError("synth: noise must be finite and >= 0");
  }
  if (spec.classes.empty()) throw ArgumentError("synth: no classes given");
  if (spec.points == 0) throw ArgumentError("synth: points must be >= 1");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::vector<LabeledCloud> out;
  out.reserve(spec.classes.size() * spec.per_class);
  for (std::size_t label = 0; label < spec.classes.size(); ++label) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      std::vector<Point3> pts = sample_surface(spec.classes[label], spec.points, rng);
      if (spec.noise > 0.0) {
        for (auto& p : pts) {
          for (double& c : p) c += spec.noise * jitter(rng);
        }
      }
      if (spec.rotate) pts = random_rotation(pts, rng);
      out.push_back({PointCloud(std::move(pts)), label});
    }
  }
  return out;
}

namespace {

template <typename T>
T parse_value(std::string_view key, std::string_view v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ArgumentError("synth spec: invalid value '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

}  // namespace

SynthSpec parse_synth_spec(std::string_view text) {
  SynthSpec spec;
  spec.classes = {ShapeKind::sphere, ShapeKind::cube, ShapeKind::cylinder, ShapeKind::plane};
  spec.per_class = 10;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) {
    if (tok.front() == '#') {
      std::getline(in, tok);
      continue;
    }
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0) throw ArgumentError("synth spec: expected key=value, got '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    const std::string_view value = std::string_view(tok).substr(eq + 1);
    if (key == "classes") {
      spec.classes.clear();
      std::size_t start = 0;
      while (start <= value.size()) {
        auto comma = value.find(',', start);
        if (comma == std::string_view::npos) comma = value.size();
        spec.classes.push_back(parse_shape(value.substr(start, comma - start)));
        start = comma + 1;
      }
    } else if (key == "count") {
      spec.per_class = parse_value<std::size_t>(key, value);
    } else if (key == "points") {
      spec.points = parse_value<std::size_t>(key, value);
    } else if (key == "noise") {
      spec.noise = parse_value<double>(key, value);
    } else if (key == "seed") {
      spec.seed = parse_value<std::uint64_t>(key, value);
    } else if (key == "rotate") {
      spec.rotate = parse_value<int>(key, value) != 0;
    } else {
      throw ArgumentError("synth spec: unknown key '" + key + "'");
    }
  }
  return spec;
}

std::pair<std::vector<LabeledCloud>, std::vector<LabeledCloud>> split_dataset(std::span<const LabeledCloud> data,
                                                                              double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ArgumentError("split fraction must lie in [0, 1]");
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data[i].label].push_back(i);
  std::mt19937_64 rng(seed);
  std::pair<std::vector<LabeledCloud>, std::vector<LabeledCloud>> out;
  for (auto& [label, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto held = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idx.size())));
    for (std::size_t j = 0; j < idx.size(); ++j) (j < held ? out.second : out.first).push_back(data[idx[j]]);
  }
  return out;
}

}  // namespace pointcpr
