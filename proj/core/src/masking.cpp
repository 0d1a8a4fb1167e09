#include "pointcpr/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "pointcpr/errors.hpp"
#include "pointcpr/ops.hpp"

namespace pointcpr {

MaskPartition make_mask(std::size_t m, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ArgumentError("make_mask: ratio must lie in (0, 1), got " + std::to_string(ratio));
  }
  const auto masked = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(m)));
  if (masked == 0 || masked >= m) {
    throw ArgumentError("make_mask: ratio " + std::to_string(ratio) + " leaves " +
                        std::to_string(masked) + " of " + std::to_string(m) +
                        " patches masked; need at least one masked and one visible");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  MaskPartition part;
  part.mask_ratio = ratio;
  part.masked.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(masked));
  part.visible.assign(order.begin() + static_cast<std::ptrdiff_t>(masked), order.end());
  std::sort(part.masked.begin(), part.masked.end());
  std::sort(part.visible.begin(), part.visible.end());
  return part;
}

MaskPartition all_visible(std::size_t m) {
  MaskPartition part;
  part.visible.resize(m);
  std::iota(part.visible.begin(), part.visible.end(), std::size_t{0});
  return part;
}

EmbeddingWeights make_embedding(ParameterSet& params, const ModelConfig& config, bool with_decoder,
                                Initializer& init) {
  EmbeddingWeights w;
  w.dim = config.dim;
  w.point_mlp = make_mlp(params, "embed.point_mlp", {3, config.embed_hidden1, config.embed_hidden2},
                         Activation::relu, true, init);
  w.post = make_linear(params, "embed.post", config.embed_hidden2, config.dim, init);
  w.encoder_pos = make_mlp(params, "embed.pos_encoder", {3, config.pos_hidden, config.dim},
                           Activation::gelu, false, init);
  if (with_decoder) {
    w.decoder_pos = make_mlp(params, "embed.pos_decoder", {3, config.pos_hidden, config.dim},
                             Activation::gelu, false, init);
    const bool per_slot =
        config.decoder == DecoderKind::partial && config.mask_query == MaskQueryMode::per_slot;
    const std::size_t rows = per_slot ? config.num_patches : 1;
    w.mask_query = params.add("embed.mask_query", init.normal({rows, config.dim}, 0.02));
  }
  return w;
}

Tensor embed_semantic(const Tensor& relcoords, const EmbeddingWeights& w) {
  if (relcoords.rank() != 3 || relcoords.dim(2) != 3) {
    throw DimensionError("embed_semantic: expected [P, K, 3] relcoords, got " +
                         shape_to_string(relcoords.shape()));
  }
  const std::size_t p = relcoords.dim(0);
  const std::size_t k = relcoords.dim(1);
  Tensor per_point = mlp_forward(reshape(relcoords, {p * k, 3}), w.point_mlp);
  Tensor pooled = max_along(reshape(per_point, {p, k, w.point_mlp.out_dim()}), 1);
  return linear(pooled, w.post);
}

Tensor embed_position(const Tensor& centers, const EmbeddingWeights& w, PositionTable which) {
  if (centers.rank() != 2 || centers.dim(1) != 3) {
    throw DimensionError("embed_position: expected [P, 3] centres, got " + shape_to_string(centers.shape()));
  }
  if (which == PositionTable::decoder) {
    if (!w.has_decoder_tables()) throw ConfigError("embed_position: model has no decoder positional table");
    return mlp_forward(centers, w.decoder_pos);
  }
  return mlp_forward(centers, w.encoder_pos);
}

Tensor gather_relcoords(const PatchSet& patches, std::span<const std::size_t> indices) {
  const std::size_t k = patches.patch_size;
  std::vector<double> values;
  values.reserve(indices.size() * k * 3);
  for (std::size_t i : indices) {
    if (i >= patches.num_patches) throw ArgumentError("patch index out of range");
    for (std::size_t j = 0; j < k; ++j) {
      const Point3& r = patches.relcoord(i, j);
      values.insert(values.end(), r.begin(), r.end());
    }
  }
  return Tensor({indices.size(), k, 3}, std::move(values));
}

Tensor gather_centers(const PatchSet& patches, std::span<const std::size_t> indices) {
  std::vector<double> values;
  values.reserve(indices.size() * 3);
  for (std::size_t i : indices) {
    if (i >= patches.num_patches) throw ArgumentError("patch index out of range");
    values.insert(values.end(), patches.centers[i].begin(), patches.centers[i].end());
  }
  return Tensor({indices.size(), 3}, std::move(values));
}

std::vector<Point3> select_centers(const PatchSet& patches, std::span<const std::size_t> indices) {
  std::vector<Point3> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(patches.centers.at(i));
  return out;
}

EncoderInputs initial_features(const PatchSet& patches, const MaskPartition& mask,
                               const EmbeddingWeights& w) {
  if (mask.num_patches() != patches.num_patches) {
    throw DimensionError("initial_features: mask covers " + std::to_string(mask.num_patches()) +
                         " patches but the patch set has " + std::to_string(patches.num_patches));
  }
  if (mask.visible.empty()) throw ArgumentError("initial_features: no visible patches");
  EncoderInputs in;
  Tensor semantic = embed_semantic(gather_relcoords(patches, mask.visible), w);
  in.pos = embed_position(gather_centers(patches, mask.visible), w, PositionTable::encoder);
  in.tokens = add(semantic, in.pos);
  in.centers = select_centers(patches, mask.visible);
  return in;
}

}  // namespace pointcpr
