#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pointcpr/geometry.hpp"

namespace pointcpr {

enum class ShapeKind { sphere, cube, cylinder, plane, torus };

std::string to_string(ShapeKind kind);
/// Throws ArgumentError for an unknown name.
ShapeKind parse_shape(std::string_view name);

/// Uniform surface samples of the canonical shape: unit sphere, the cube
/// [-1,1]^3, the radius-1 cylinder with z in [-1,1] including caps, the
/// square [-1,1]^2 at z=0, and the torus with radii 1 and 0.35.
std::vector<Point3> sample_surface(ShapeKind kind, std::size_t n, std::mt19937_64& rng);

/// Uniformly random rotation (Haar measure via a normalized Gaussian quaternion).
std::vector<Point3> random_rotation(std::span<const Point3> points, std::mt19937_64& rng);

struct LabeledCloud {
  PointCloud cloud;
  std::size_t label = 0;
};

struct SynthSpec {
  std::vector<ShapeKind> classes;
  std::size_t per_class = 0;
  std::size_t points = 1024;
  double noise = 0.0;
  bool rotate = true;
  std::uint64_t seed = 0;
};

/// `per_class` clouds of every class, label = position in `classes`,
/// ordered class by class. Deterministic in `spec.seed`.
std::vector<LabeledCloud> synth_dataset(const SynthSpec& spec);

/// Parses "key=value" tokens separated by whitespace or newlines, e.g.
/// "classes=sphere,cube count=10 points=256 noise=0.01 seed=3 rotate=1".
SynthSpec parse_synth_spec(std::string_view text);

/// Stratified split: the first `round(fraction * n_c)` clouds of each
/// class after a seeded shuffle go to the second set.
std::pair<std::vector<LabeledCloud>, std::vector<LabeledCloud>> split_dataset(std::span<const LabeledCloud> data,
                                                                              double fraction, std::uint64_t seed);

}  // namespace pointcpr
