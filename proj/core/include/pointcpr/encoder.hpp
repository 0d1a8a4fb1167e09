#pragma once

#include <span>
#include <vector>

#include "pointcpr/config.hpp"
#include "pointcpr/geometry.hpp"
#include "pointcpr/nn.hpp"

namespace pointcpr {

/// Local Aggregation Module: shared local MLP over [self, neighbour]
/// feature pairs, max over the neighbourhood, then a global MLP.
struct LamWeights {
  Mlp local;   // 2d -> ... -> d, ReLU throughout
  Mlp global;  // d -> d, linear
};

struct CompactLayerWeights {
  LayerNormParams norm1;
  LamWeights lam;
  LayerNormParams norm2;
  Mlp ffn;
};

struct EncoderWeights {
  std::size_t lam_k = 0;
  std::vector<CompactLayerWeights> layers;
};

EncoderWeights make_compact_encoder(ParameterSet& params, const ModelConfig& config, Initializer& init);

/// k-NN over token centre coordinates (self included). Centres are fixed
/// for a forward pass, so the graph is built once and shared by all layers.
struct NeighborGraph {
  std::size_t tokens = 0;
  std::size_t k = 0;
  std::vector<std::size_t> indices;  // [tokens * k]
};

NeighborGraph build_neighbor_graph(std::span<const Point3> centers, std::size_t k);

Tensor local_aggregate(const Tensor& features, const NeighborGraph& graph, const LamWeights& lam);
Tensor local_aggregate(const Tensor& features, std::span<const Point3> centers, std::size_t k,
                       const LamWeights& lam);

/// h = x + pos; h += LAM(norm1(h)); out = h + FFN(norm2(h)).
Tensor encoder_layer(const Tensor& features, const Tensor& pos, const NeighborGraph& graph,
                     const CompactLayerWeights& layer);

/// Applies every layer in order, re-adding the same `pos` before each.
Tensor encode(const Tensor& e0, const Tensor& pos, std::span<const Point3> centers,
              const EncoderWeights& weights);

/// Standard Transformer encoder used as the size baseline.
struct TransformerEncoderWeights {
  std::vector<TransformerLayerWeights> layers;
};

TransformerEncoderWeights make_transformer_encoder(ParameterSet& params, const ModelConfig& config,
                                                   Initializer& init);
Tensor encode_transformer(const Tensor& e0, const Tensor& pos, const TransformerEncoderWeights& weights);

}  // namespace pointcpr
