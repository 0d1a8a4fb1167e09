#include "pointcpr/decoder.hpp"

#include <string>

#include "pointcpr/errors.hpp"
#include "pointcpr/ops.hpp"

namespace pointcpr {

DecoderWeights make_partial_decoder(ParameterSet& params, const ModelConfig& config, Initializer& init) {
  const std::size_t d = config.dim;
  DecoderWeights w;
  for (std::size_t i = 0; i < config.decoder_depth; ++i) {
    const std::string prefix = "decoder.layers." + std::to_string(i);
    PartialDecoderLayer layer;
    layer.ppm.norm_visible = make_layer_norm(params, prefix + ".ppm.norm_visible", d);
    layer.ppm.norm_query = make_layer_norm(params, prefix + ".ppm.norm_query", d);
    layer.ppm.self_attention = make_attention(params, prefix + ".ppm.self_attn", d, config.heads, init);
    layer.ppm.cross_attention = make_attention(params, prefix + ".ppm.cross_attn", d, config.heads, init);
    layer.ppm.norm_ffn = make_layer_norm(params, prefix + ".ppm.norm_ffn", d);
    layer.ppm.ffn = make_mlp(params, prefix + ".ppm.ffn", {d, d * config.ffn_ratio, d}, Activation::gelu,
                             false, init);
    layer.block = make_transformer_layer(params, prefix + ".block", d, config.heads, config.ffn_ratio, init);
    w.layers.push_back(std::move(layer));
  }
  w.norm_out = make_layer_norm(params, "decoder.norm_out", d);
  return w;
}

DecoderState ppm(const DecoderState& state, const PpmWeights& weights) {
  const std::size_t total = state.tokens.dim(0);
  const std::size_t v = state.visible_count;
  if (v == 0) throw ArgumentError("ppm: no visible tokens");
  if (v >= total) throw ArgumentError("ppm: no masked query tokens");
  if (state.decoder_pos.rank() != 2 || state.decoder_pos.dim(0) != v) {
    throw DimensionError("ppm: decoder positions " + shape_to_string(state.decoder_pos.shape()) +
                         " do not cover " + std::to_string(v) + " visible tokens");
  }
  Tensor visible = slice(state.tokens, 0, 0, v);
  Tensor query = slice(state.tokens, 0, v, total);

  Tensor kv = layer_norm(add(visible, state.decoder_pos), weights.norm_visible);
  Tensor qn = layer_norm(query, weights.norm_query);
  query = add(query, multi_head_attention(qn, qn, qn, weights.self_attention));
  query = add(query, multi_head_attention(query, kv, kv, weights.cross_attention));
  query = add(query, mlp_forward(layer_norm(query, weights.norm_ffn), weights.ffn));

  const Tensor parts[] = {kv, query};
  return DecoderState{concat(parts, 0), v, state.decoder_pos};
}

Tensor decode_with_queries(const Tensor& encoded, const Tensor& decoder_pos, const Tensor& queries,
                           const DecoderWeights& weights) {
  if (weights.layers.empty()) throw ConfigError("decode: decoder has no layers");
  if (encoded.rank() != 2 || queries.rank() != 2 || encoded.dim(1) != queries.dim(1)) {
    throw DimensionError("decode: encoded " + shape_to_string(encoded.shape()) + " and queries " +
                         shape_to_string(queries.shape()) + " are incompatible");
  }
  const std::size_t v = encoded.dim(0);
  const std::size_t q = queries.dim(0);
  const Tensor parts[] = {encoded, queries};
  DecoderState state{concat(parts, 0), v, decoder_pos};
  for (const auto& layer : weights.layers) {
    state = ppm(state, layer.ppm);
    state.tokens = transformer_layer(state.tokens, layer.block);
  }
  return layer_norm(slice(state.tokens, 0, v, v + q), weights.norm_out);
}

Tensor mask_queries(const Tensor& mask_query, std::size_t masked_count) {
  if (masked_count == 0) throw ArgumentError("decode: masked count must be at least 1");
  const std::size_t rows = mask_query.dim(0);
  if (rows == 1) return gather_rows(mask_query, std::vector<std::size_t>(masked_count, 0));
  if (masked_count > rows) {
    throw ArgumentError("decode: " + std::to_string(masked_count) + " masked slots requested but the query table has " +
                        std::to_string(rows) + " rows");
  }
  return slice(mask_query, 0, 0, masked_count);
}

Tensor decode(const Tensor& encoded, const Tensor& decoder_pos, std::size_t masked_count,
              const DecoderWeights& weights, const Tensor& mask_query) {
  return decode_with_queries(encoded, decoder_pos, mask_queries(mask_query, masked_count), weights);
}

VanillaDecoderWeights make_vanilla_decoder(ParameterSet& params, const ModelConfig& config, Initializer& init) {
  VanillaDecoderWeights w;
  for (std::size_t i = 0; i < config.decoder_depth; ++i) {
    w.layers.push_back(make_transformer_layer(params, "decoder.layers." + std::to_string(i), config.dim,
                                              config.heads, config.ffn_ratio, init));
  }
  w.norm_out = make_layer_norm(params, "decoder.norm_out", config.dim);
  if (config.decoder == DecoderKind::vanilla) {
    w.masked_pos = make_mlp(params, "decoder.masked_pos", {3, config.pos_hidden, config.dim}, Activation::gelu,
                            false, init);
  }
  return w;
}

Tensor decode_vanilla(const Tensor& encoded, const Tensor& decoder_pos, std::size_t masked_count,
                      const VanillaDecoderWeights& weights, const Tensor& mask_token,
                      const Tensor* masked_centers, bool use_masked_pos) {
  if (weights.layers.empty()) throw ConfigError("decode_vanilla: decoder has no layers");
  if (masked_count == 0) throw ArgumentError("decode_vanilla: masked count must be at least 1");
  const std::size_t v = encoded.dim(0);
  const std::size_t d = encoded.dim(1);
  if (decoder_pos.rank() != 2 || decoder_pos.dim(0) != v) {
    throw DimensionError("decode_vanilla: decoder positions " + shape_to_string(decoder_pos.shape()) +
                         " do not cover " + std::to_string(v) + " visible tokens");
  }

  Tensor masked_pos;
  if (use_masked_pos) {
    if (masked_centers == nullptr) {
      throw ArgumentError("decode_vanilla: masked-centre positions requested but no masked centres supplied");
    }
    if (weights.masked_pos.layers.empty()) {
      throw ConfigError("decode_vanilla: decoder was built without a masked-position MLP");
    }
    if (masked_centers->rank() != 2 || masked_centers->dim(0) != masked_count) {
      throw DimensionError("decode_vanilla: masked centres " + shape_to_string(masked_centers->shape()) +
                           " do not match " + std::to_string(masked_count) + " masked slots");
    }
    masked_pos = mlp_forward(*masked_centers, weights.masked_pos);
  } else {
    masked_pos = Tensor::zeros({masked_count, d});
  }

  const Tensor token_parts[] = {encoded, mask_queries(mask_token, masked_count)};
  const Tensor pos_parts[] = {decoder_pos, masked_pos};
  Tensor x = concat(token_parts, 0);
  const Tensor pos = concat(pos_parts, 0);
  for (const auto& layer : weights.layers) x = transformer_layer(add(x, pos), layer);
  return layer_norm(slice(x, 0, v, v + masked_count), weights.norm_out);
}

}  // namespace pointcpr
