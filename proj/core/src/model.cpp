#include "pointcpr/model.hpp"

#include <algorithm>
#include <cmath>

#include "pointcpr/errors.hpp"
#include "pointcpr/ops.hpp"

namespace pointcpr {

std::string to_string(ModelTarget target) {
  switch (target) {
    case ModelTarget::encoder_only: return "encoder-only";
    case ModelTarget::full_pretrain: return "full-pretrain";
    case ModelTarget::classifier: return "classifier";
  }
  return "?";
}

ModelTarget parse_target(std::string_view name) {
  std::string s(name);
  std::replace(s.begin(), s.end(), '_', '-');
  if (s == "encoder-only") return ModelTarget::encoder_only;
  if (s == "full-pretrain") return ModelTarget::full_pretrain;
  if (s == "classifier") return ModelTarget::classifier;
  throw ArgumentError("unknown target '" + std::string(name) +
                      "' (expected encoder-only, full-pretrain or classifier)");
}

PointCprModel build_model(const ModelConfig& config, ModelTarget target, std::uint64_t seed) {
  config.validate();
  PointCprModel model;
  model.config = config;
  model.target = target;
  Initializer init(seed);
  const bool pretrain = target == ModelTarget::full_pretrain;

  model.embedding = make_embedding(model.params, config, pretrain, init);
  if (config.encoder == EncoderKind::compact) {
    model.compact_encoder = make_compact_encoder(model.params, config, init);
  } else {
    model.transformer_encoder = make_transformer_encoder(model.params, config, init);
  }

  if (pretrain) {
    if (config.decoder == DecoderKind::partial) {
      model.decoder = make_partial_decoder(model.params, config, init);
    } else {
      model.vanilla_decoder = make_vanilla_decoder(model.params, config, init);
    }
    const std::size_t h = config.recon_hidden;
    model.heads.semantic = make_mlp(model.params, "heads.semantic", {config.dim, h, 3 * config.patch_size},
                                    Activation::gelu, false, init);
    model.heads.position =
        make_mlp(model.params, "heads.position", {config.dim, h, 3}, Activation::gelu, false, init);
  }

  if (target == ModelTarget::classifier) {
    const std::size_t h = config.cls_hidden;
    model.classifier.mlp = make_mlp(model.params, "classifier", {2 * config.dim, h, h, config.classes},
                                    Activation::relu, false, init);
  }
  return model;
}

std::size_t fps_start_index(const PointCloud& pc, FpsStart policy) {
  if (policy == FpsStart::first) return 0;
  Point3 c{0.0, 0.0, 0.0};
  for (const auto& p : pc.points()) {
    for (int a = 0; a < 3; ++a) c[a] += p[a];
  }
  const double n = static_cast<double>(pc.size());
  for (double& v : c) v /= n;
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const double d = squared_distance(pc[i], c);
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

PatchSet patchify_cloud(const PointCloud& pc, const ModelConfig& config, std::size_t num_patches) {
  if (pc.size() < num_patches || pc.size() < config.patch_size) {
    throw ArgumentError("cloud of " + std::to_string(pc.size()) + " points cannot form " +
                        std::to_string(num_patches) + " patches of " + std::to_string(config.patch_size) +
                        " points");
  }
  return patchify(pc, num_patches, config.patch_size, fps_start_index(pc, config.fps_start));
}

PatchSet prepare_patches(const PointCloud& cloud, const ModelConfig& config) {
  return patchify_cloud(normalize(cloud), config, config.num_patches);
}

Tensor encode_visible(const PointCprModel& model, const PatchSet& patches, const MaskPartition& mask) {
  EncoderInputs in = initial_features(patches, mask, model.embedding);
  if (model.config.encoder == EncoderKind::compact) {
    return encode(in.tokens, in.pos, in.centers, model.compact_encoder);
  }
  return encode_transformer(in.tokens, in.pos, model.transformer_encoder);
}

Tensor classify_logits(const PointCprModel& model, const PatchSet& patches) {
  if (!model.has_classifier()) throw ConfigError("classify: model was built without a classifier head");
  Tensor tokens = encode_visible(model, patches, all_visible(patches.num_patches));
  const Tensor pooled[] = {mean_along(tokens, 0), max_along(tokens, 0)};
  Tensor feature = reshape(concat(pooled, 0), {1, 2 * model.config.dim});
  return mlp_forward(feature, model.classifier.mlp);
}

std::size_t copy_matching_parameters(const ParameterSet& source, ParameterSet& target) {
  std::size_t copied = 0;
  for (auto& p : target.items()) {
    const Parameter* src = source.find(p.name);
    if (src == nullptr || src->tensor.shape() != p.tensor.shape()) continue;
    auto from = src->tensor.data();
    std::copy(from.begin(), from.end(), p.tensor.mutable_data().begin());
    ++copied;
  }
  return copied;
}

}  // namespace pointcpr
