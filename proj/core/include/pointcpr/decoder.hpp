#pragma once

#include <vector>

#include "pointcpr/config.hpp"
#include "pointcpr/nn.hpp"

namespace pointcpr {

/// Decoder tokens in [visible; masked] order.
struct DecoderState {
  Tensor tokens;               // [M, d]
  std::size_t visible_count = 0;
  Tensor decoder_pos;          // T^p for the visible tokens, [visible_count, d]

  std::size_t masked_count() const { return tokens.dim(0) - visible_count; }
};

/// Partial-aware prediction module.
struct PpmWeights {
  LayerNormParams norm_visible;
  LayerNormParams norm_query;
  AttentionWeights self_attention;
  AttentionWeights cross_attention;
  LayerNormParams norm_ffn;
  Mlp ffn;
};

struct PartialDecoderLayer {
  PpmWeights ppm;
  TransformerLayerWeights block;
};

struct DecoderWeights {
  std::vector<PartialDecoderLayer> layers;
  LayerNormParams norm_out;
};

DecoderWeights make_partial_decoder(ParameterSet& params, const ModelConfig& config, Initializer& init);

/// K' = norm(K + T^p); Q += selfattn(norm(Q)); Q += crossattn(Q, K', K');
/// Q' = Q + FFN(norm(Q)); returns [K'; Q'].
DecoderState ppm(const DecoderState& state, const PpmWeights& weights);

/// Runs the partial-aware decoder with explicit masked-slot queries
/// [masked, d]. Returns the normalized masked-slot features R.
Tensor decode_with_queries(const Tensor& encoded, const Tensor& decoder_pos, const Tensor& queries,
                           const DecoderWeights& weights);

/// Builds the masked-slot queries from the learned `mask_query` table
/// (one shared row broadcast, or the first `masked_count` rows) and
/// decodes. Masked-patch geometry is not an input.
Tensor decode(const Tensor& encoded, const Tensor& decoder_pos, std::size_t masked_count,
              const DecoderWeights& weights, const Tensor& mask_query);

Tensor mask_queries(const Tensor& mask_query, std::size_t masked_count);

/// Point-MAE style decoder: Transformer layers over [visible; mask token]
/// with positions re-added per layer.
struct VanillaDecoderWeights {
  std::vector<TransformerLayerWeights> layers;
  LayerNormParams norm_out;
  /// Positional MLP for masked centres; empty for the no-position variant.
  Mlp masked_pos;
};

VanillaDecoderWeights make_vanilla_decoder(ParameterSet& params, const ModelConfig& config, Initializer& init);

/// With `use_masked_pos`, masked slots receive masked_pos(masked_centers)
/// each layer (the position-leaking variant); otherwise they get no
/// positional signal. `masked_centers` is [masked_count, 3] and required
/// only when `use_masked_pos` is set.
Tensor decode_vanilla(const Tensor& encoded, const Tensor& decoder_pos, std::size_t masked_count,
                      const VanillaDecoderWeights& weights, const Tensor& mask_token,
                      const Tensor* masked_centers, bool use_masked_pos);

}  // namespace pointcpr
