#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pointcpr/config.hpp"
#include "pointcpr/geometry.hpp"
#include "pointcpr/nn.hpp"

namespace pointcpr {

/// Split of patch indices into visible and masked sets. Both lists are
/// ascending; together they cover 0..M-1 exactly once.
struct MaskPartition {
  std::vector<std::size_t> visible;
  std::vector<std::size_t> masked;
  double mask_ratio = 0.0;

  std::size_t num_patches() const { return visible.size() + masked.size(); }
};

/// Uniformly random partition with round(ratio * m) masked patches.
MaskPartition make_mask(std::size_t m, double ratio, std::uint64_t seed);

/// Every patch visible; used when encoding whole clouds downstream.
MaskPartition all_visible(std::size_t m);

struct EmbeddingWeights {
  Mlp point_mlp;    // shared per-point 3 -> h1 -> h2, ReLU after each
  Linear post;      // h2 -> d after max-pool
  Mlp encoder_pos;  // 3 -> p -> d
  Mlp decoder_pos;  // 3 -> p -> d, only when a decoder is built
  /// [rows, d]; one row broadcast to every slot, or one row per slot.
  Tensor mask_query;
  std::size_t dim = 0;

  bool has_decoder_tables() const { return !decoder_pos.layers.empty(); }
};

EmbeddingWeights make_embedding(ParameterSet& params, const ModelConfig& config, bool with_decoder,
                                Initializer& init);

enum class PositionTable { encoder, decoder };

/// relcoords [P, K, 3] -> tokens [P, d]. Exactly invariant to the order
/// of the K points within each patch.
Tensor embed_semantic(const Tensor& relcoords, const EmbeddingWeights& w);

/// centers [P, 3] -> [P, d].
Tensor embed_position(const Tensor& centers, const EmbeddingWeights& w, PositionTable which);

/// [indices.size(), K, 3] relative coordinates of the selected patches.
Tensor gather_relcoords(const PatchSet& patches, std::span<const std::size_t> indices);
/// [indices.size(), 3] centres of the selected patches.
Tensor gather_centers(const PatchSet& patches, std::span<const std::size_t> indices);
std::vector<Point3> select_centers(const PatchSet& patches, std::span<const std::size_t> indices);

struct EncoderInputs {
  Tensor tokens;  // E_0 = semantic + encoder position, [V, d]
  Tensor pos;     // encoder positional embedding of visible centres, [V, d]
  std::vector<Point3> centers;
};

/// Embeds the visible patches only; masked patch data is never read.
EncoderInputs initial_features(const PatchSet& patches, const MaskPartition& mask,
                               const EmbeddingWeights& w);

}  // namespace pointcpr
