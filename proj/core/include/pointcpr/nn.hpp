#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pointcpr/tensor.hpp"

namespace pointcpr {

struct Parameter {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

/// Ordered, uniquely named set of model parameters. Model weight structs
/// hold Tensor handles aliasing the entries here, so optimizers and
/// checkpoints operate on the set while forward code reads the structs.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  /// Registers `value` as a trainable leaf. Throws ConfigError on a duplicate name.
  Tensor add(std::string name, Tensor value, bool trainable = true);

  const std::vector<Parameter>& items() const { return params_; }
  std::vector<Parameter>& items() { return params_; }
  const Parameter* find(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  std::size_t size() const { return params_.size(); }
  /// Sum of element counts over all parameters.
  std::size_t count() const;
  /// Element count over parameters whose name starts with `prefix`.
  std::size_t count_prefix(std::string_view prefix) const;

  void zero_grad();

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Seeded initializer. All model randomness flows through one of these.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : engine_(seed) {}

  Tensor uniform(Shape shape, double bound);
  Tensor normal(Shape shape, double stddev);
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

enum class Activation { none, relu, gelu };

Tensor activate(const Tensor& x, Activation act);
Activation parse_activation(std::string_view name);

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
  std::size_t in = 0;
  std::size_t out = 0;
};

Linear make_linear(ParameterSet& params, const std::string& prefix, std::size_t in,
                   std::size_t out, Initializer& init);
Tensor linear(const Tensor& x, const Linear& layer);

/// Affine layers with `activation` between them. When `activate_last`
/// is set the activation also follows the final layer.
struct Mlp {
  std::vector<Linear> layers;
  Activation activation = Activation::relu;
  bool activate_last = false;

  std::size_t in_dim() const { return layers.front().in; }
  std::size_t out_dim() const { return layers.back().out; }
};

/// `widths` lists every extent including input and output; consecutive
/// pairs become layers.
Mlp make_mlp(ParameterSet& params, const std::string& prefix, const std::vector<std::size_t>& widths,
             Activation activation, bool activate_last, Initializer& init);
Tensor mlp_forward(const Tensor& x, const Mlp& mlp);

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;
};

inline constexpr double kLayerNormEps = 1e-5;

LayerNormParams make_layer_norm(ParameterSet& params, const std::string& prefix, std::size_t dim);
Tensor layer_norm(const Tensor& x, const LayerNormParams& norm);

struct AttentionWeights {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  std::size_t heads = 1;
};

AttentionWeights make_attention(ParameterSet& params, const std::string& prefix, std::size_t dim,
                                std::size_t heads, Initializer& init);

/// Scaled dot-product attention with per-head projections. q: [Lq, d],
/// k and v: [Lk, d]. Returns [Lq, d].
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionWeights& weights);

/// Pre-norm Transformer block: x + attn(n1(x)), then + ffn(n2(x)).
struct TransformerLayerWeights {
  LayerNormParams norm1;
  AttentionWeights attention;
  LayerNormParams norm2;
  Mlp ffn;
};

TransformerLayerWeights make_transformer_layer(ParameterSet& params, const std::string& prefix,
                                               std::size_t dim, std::size_t heads,
                                               std::size_t ffn_ratio, Initializer& init);
Tensor transformer_layer(const Tensor& x, const TransformerLayerWeights& layer);

}  // namespace pointcpr
