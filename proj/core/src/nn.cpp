#include "pointcpr/nn.hpp"

#include <cmath>

#include "pointcpr/errors.hpp"
#include "pointcpr/ops.hpp"

namespace pointcpr {

Tensor ParameterSet::add(std::string name, Tensor value, bool trainable) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  value.set_requires_grad(trainable);
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{std::move(name), value, trainable});
  return value;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[it->second];
}

const Tensor& ParameterSet::at(std::string_view name) const {
  const Parameter* p = find(name);
  if (p == nullptr) throw ArgumentError("no parameter named '" + std::string(name) + "'");
  return p->tensor;
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

std::size_t ParameterSet::count_prefix(std::string_view prefix) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (std::string_view(p.name).starts_with(prefix)) n += p.tensor.numel();
  }
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Tensor Initializer::uniform(Shape shape, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = dist(engine_);
  return Tensor(std::move(shape), std::move(values));
}

Tensor Initializer::normal(Shape shape, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = dist(engine_);
  return Tensor(std::move(shape), std::move(values));
}

Tensor activate(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::relu:
      return relu(x);
    case Activation::gelu:
      return gelu(x);
    case Activation::none:
      break;
  }
  return x;
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "gelu") return Activation::gelu;
  if (name == "none" || name == "linear") return Activation::none;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

Linear make_linear(ParameterSet& params, const std::string& prefix, std::size_t in,
                   std::size_t out, Initializer& init) {
  if (in == 0 || out == 0) throw ConfigError("linear layer '" + prefix + "' has a zero extent");
  // Same bound PyTorch's nn.Linear default uses for both weight and bias.
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear layer;
  layer.in = in;
  layer.out = out;
  layer.weight = params.add(prefix + ".weight", init.uniform({in, out}, bound));
  layer.bias = params.add(prefix + ".bias", init.uniform({out}, bound));
  return layer;
}

Tensor linear(const Tensor& x, const Linear& layer) {
  return add(matmul(x, layer.weight), layer.bias);
}

Mlp make_mlp(ParameterSet& params, const std::string& prefix, const std::vector<std::size_t>& widths,
             Activation activation, bool activate_last, Initializer& init) {
  if (widths.size() < 2) throw ConfigError("mlp '" + prefix + "' needs at least two widths");
  Mlp mlp;
  mlp.activation = activation;
  mlp.activate_last = activate_last;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    mlp.layers.push_back(
        make_linear(params, prefix + "." + std::to_string(i), widths[i], widths[i + 1], init));
  }
  return mlp;
}

Tensor mlp_forward(const Tensor& x, const Mlp& mlp) {
  if (mlp.layers.empty()) throw ConfigError("mlp has no layers");
  for (std::size_t i = 0; i + 1 < mlp.layers.size(); ++i) {
    if (mlp.layers[i].out != mlp.layers[i + 1].in) {
      throw ConfigError("mlp layer " + std::to_string(i) + " emits " +
                        std::to_string(mlp.layers[i].out) + " features but layer " +
                        std::to_string(i + 1) + " expects " + std::to_string(mlp.layers[i + 1].in));
    }
  }
  Tensor h = x;
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    h = linear(h, mlp.layers[i]);
    const bool last = i + 1 == mlp.layers.size();
    if (!last || mlp.activate_last) h = activate(h, mlp.activation);
  }
  return h;
}

LayerNormParams make_layer_norm(ParameterSet& params, const std::string& prefix, std::size_t dim) {
  return LayerNormParams{params.add(prefix + ".gamma", Tensor::full({dim}, 1.0)),
                         params.add(prefix + ".beta", Tensor::zeros({dim}))};
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& norm) {
  return layer_norm(x, norm.gamma, norm.beta, kLayerNormEps);
}

AttentionWeights make_attention(ParameterSet& params, const std::string& prefix, std::size_t dim,
                                std::size_t heads, Initializer& init) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention '" + prefix + "': dim " + std::to_string(dim) +
                      " is not divisible by " + std::to_string(heads) + " heads");
  }
  AttentionWeights w;
  w.heads = heads;
  w.query = make_linear(params, prefix + ".query", dim, dim, init);
  w.key = make_linear(params, prefix + ".key", dim, dim, init);
  w.value = make_linear(params, prefix + ".value", dim, dim, init);
  w.output = make_linear(params, prefix + ".output", dim, dim, init);
  return w;
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionWeights& weights) {
  const std::size_t dim = weights.query.in;
  const std::size_t heads = weights.heads;
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention: dim " + std::to_string(dim) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(1) != dim || k.dim(1) != dim ||
      v.dim(1) != dim) {
    throw DimensionError("attention: expected [L, " + std::to_string(dim) + "] inputs, got " +
                         shape_to_string(q.shape()) + ", " + shape_to_string(k.shape()) + ", " +
                         shape_to_string(v.shape()));
  }
  if (k.dim(0) != v.dim(0)) {
    throw DimensionError("attention: key and value token counts differ (" +
                         std::to_string(k.dim(0)) + " vs " + std::to_string(v.dim(0)) + ")");
  }
  const std::size_t lq = q.dim(0);
  const std::size_t lk = k.dim(0);
  const std::size_t dh = dim / heads;
  static constexpr std::size_t kHeadsFirst[] = {1, 0, 2};
  static constexpr std::size_t kKeysT[] = {1, 2, 0};

  Tensor qh = permute(reshape(linear(q, weights.query), {lq, heads, dh}), kHeadsFirst);
  Tensor kt = permute(reshape(linear(k, weights.key), {lk, heads, dh}), kKeysT);
  Tensor vh = permute(reshape(linear(v, weights.value), {lk, heads, dh}), kHeadsFirst);

  Tensor scores = scale(matmul(qh, kt), 1.0 / std::sqrt(static_cast<double>(dh)));
  Tensor attn = softmax(scores, 2);
  Tensor ctx = permute(matmul(attn, vh), kHeadsFirst);  // [lq, heads, dh]
  return linear(reshape(ctx, {lq, dim}), weights.output);
}

TransformerLayerWeights make_transformer_layer(ParameterSet& params, const std::string& prefix,
                                               std::size_t dim, std::size_t heads,
                                               std::size_t ffn_ratio, Initializer& init) {
  TransformerLayerWeights w;
  w.norm1 = make_layer_norm(params, prefix + ".norm1", dim);
  w.attention = make_attention(params, prefix + ".attn", dim, heads, init);
  w.norm2 = make_layer_norm(params, prefix + ".norm2", dim);
  w.ffn = make_mlp(params, prefix + ".ffn", {dim, dim * ffn_ratio, dim}, Activation::gelu, false,
                   init);
  return w;
}

Tensor transformer_layer(const Tensor& x, const TransformerLayerWeights& layer) {
  Tensor n1 = layer_norm(x, layer.norm1);
  Tensor h = add(x, multi_head_attention(n1, n1, n1, layer.attention));
  return add(h, mlp_forward(layer_norm(h, layer.norm2), layer.ffn));
}

}  // namespace pointcpr
