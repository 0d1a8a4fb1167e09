#include "pointcpr/encoder.hpp"

#include <string>

#include "pointcpr/errors.hpp"
#include "pointcpr/ops.hpp"

namespace pointcpr {

EncoderWeights make_compact_encoder(ParameterSet& params, const ModelConfig& config, Initializer& init) {
  const std::size_t d = config.dim;
  EncoderWeights w;
  w.lam_k = config.lam_k;
  for (std::size_t i = 0; i < config.encoder_depth; ++i) {
    const std::string prefix = "encoder.layers." + std::to_string(i);
    std::vector<std::size_t> local_widths{2 * d};
    local_widths.insert(local_widths.end(), config.lam_hidden.begin(), config.lam_hidden.end());
    local_widths.push_back(d);

    CompactLayerWeights layer;
    layer.norm1 = make_layer_norm(params, prefix + ".norm1", d);
    layer.lam.local = make_mlp(params, prefix + ".lam.local", local_widths, Activation::relu, true, init);
    layer.lam.global = make_mlp(params, prefix + ".lam.global", {d, d}, Activation::none, false, init);
    layer.norm2 = make_layer_norm(params, prefix + ".norm2", d);
    layer.ffn = make_mlp(params, prefix + ".ffn", {d, d * config.ffn_ratio, d}, Activation::gelu, false, init);
    w.layers.push_back(std::move(layer));
  }
  return w;
}

NeighborGraph build_neighbor_graph(std::span<const Point3> centers, std::size_t k) {
  if (k == 0 || k > centers.size()) {
    throw ArgumentError("local aggregation needs 1 <= k <= tokens, got k=" + std::to_string(k) +
                        " with " + std::to_string(centers.size()) + " tokens");
  }
  NeighborGraph g;
  g.tokens = centers.size();
  g.k = k;
  g.indices = knn_indices(centers, centers, k);
  return g;
}

Tensor local_aggregate(const Tensor& features, const NeighborGraph& graph, const LamWeights& lam) {
  if (features.rank() != 2 || features.dim(0) != graph.tokens) {
    throw DimensionError("local_aggregate: features " + shape_to_string(features.shape()) +
                         " do not match a neighbour graph over " + std::to_string(graph.tokens) + " tokens");
  }
  const std::size_t v = graph.tokens;
  const std::size_t k = graph.k;
  std::vector<std::size_t> self(v * k);
  for (std::size_t i = 0; i < v; ++i) {
    for (std::size_t j = 0; j < k; ++j) self[i * k + j] = i;
  }
  const Tensor pairs[] = {gather_rows(features, self), gather_rows(features, graph.indices)};
  Tensor local = mlp_forward(concat(pairs, 1), lam.local);
  Tensor pooled = max_along(reshape(local, {v, k, lam.local.out_dim()}), 1);
  return mlp_forward(pooled, lam.global);
}

Tensor local_aggregate(const Tensor& features, std::span<const Point3> centers, std::size_t k,
                       const LamWeights& lam) {
  return local_aggregate(features, build_neighbor_graph(centers, k), lam);
}

Tensor encoder_layer(const Tensor& features, const Tensor& pos, const NeighborGraph& graph,
                     const CompactLayerWeights& layer) {
  Tensor h = add(features, pos);
  h = add(h, local_aggregate(layer_norm(h, layer.norm1), graph, layer.lam));
  return add(h, mlp_forward(layer_norm(h, layer.norm2), layer.ffn));
}

Tensor encode(const Tensor& e0, const Tensor& pos, std::span<const Point3> centers,
              const EncoderWeights& weights) {
  if (weights.layers.empty()) throw ConfigError("encode: encoder has no layers");
  if (e0.shape() != pos.shape()) {
    throw DimensionError("encode: tokens " + shape_to_string(e0.shape()) + " and positions " +
                         shape_to_string(pos.shape()) + " differ");
  }
  const NeighborGraph graph = build_neighbor_graph(centers, weights.lam_k);
  Tensor h = e0;
  for (const auto& layer : weights.layers) h = encoder_layer(h, pos, graph, layer);
  return h;
}

TransformerEncoderWeights make_transformer_encoder(ParameterSet& params, const ModelConfig& config,
                                                   Initializer& init) {
  TransformerEncoderWeights w;
  for (std::size_t i = 0; i < config.encoder_depth; ++i) {
    w.layers.push_back(make_transformer_layer(params, "encoder.layers." + std::to_string(i), config.dim,
                                              config.heads, config.ffn_ratio, init));
  }
  return w;
}

Tensor encode_transformer(const Tensor& e0, const Tensor& pos, const TransformerEncoderWeights& weights) {
  if (weights.layers.empty()) throw ConfigError("encode_transformer: encoder has no layers");
  Tensor h = e0;
  for (const auto& layer : weights.layers) h = transformer_layer(add(h, pos), layer);
  return h;
}

}  // namespace pointcpr
