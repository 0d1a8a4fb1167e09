#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pointcpr/config.hpp"
#include "pointcpr/decoder.hpp"
#include "pointcpr/encoder.hpp"
#include "pointcpr/geometry.hpp"
#include "pointcpr/masking.hpp"
#include "pointcpr/nn.hpp"

namespace pointcpr {

enum class ModelTarget { encoder_only, full_pretrain, classifier };

std::string to_string(ModelTarget target);
/// Accepts "encoder-only", "full-pretrain", "classifier" (underscores also accepted).
ModelTarget parse_target(std::string_view name);

/// Semantic head d -> hidden -> 3K and position head d -> hidden -> 3.
struct ReconHeads {
  Mlp semantic;
  Mlp position;
};

/// Mean and max pooling over encoder tokens, concatenated, then an MLP
/// 2d -> hidden -> hidden -> classes.
struct ClassifierHead {
  Mlp mlp;
};

/// Weight records alias entries of `params`; the struct is move-only so
/// the aliasing cannot be silently broken by a copy.
struct PointCprModel {
  ModelConfig config;
  ModelTarget target = ModelTarget::full_pretrain;
  ParameterSet params;

  EmbeddingWeights embedding;
  EncoderWeights compact_encoder;
  TransformerEncoderWeights transformer_encoder;
  DecoderWeights decoder;
  VanillaDecoderWeights vanilla_decoder;
  ReconHeads heads;
  ClassifierHead classifier;

  bool has_decoder() const { return target == ModelTarget::full_pretrain; }
  bool has_classifier() const { return target == ModelTarget::classifier; }
};

/// Validates `config` and initializes every parameter from `seed`.
PointCprModel build_model(const ModelConfig& config, ModelTarget target, std::uint64_t seed);

/// Index of the FPS start point under the configured policy.
std::size_t fps_start_index(const PointCloud& pc, FpsStart policy);

/// FPS + KNN grouping of an already normalized cloud into `num_patches` patches.
PatchSet patchify_cloud(const PointCloud& pc, const ModelConfig& config, std::size_t num_patches);

/// normalize() followed by patchify_cloud() with config.num_patches.
PatchSet prepare_patches(const PointCloud& cloud, const ModelConfig& config);

/// Embeds and encodes the visible patches of `mask`. Returns E_n [V, d].
Tensor encode_visible(const PointCprModel& model, const PatchSet& patches, const MaskPartition& mask);

/// Class logits [1, classes] for one patch set (all patches visible).
Tensor classify_logits(const PointCprModel& model, const PatchSet& patches);

/// Copies every parameter of `source` whose name and shape match one in
/// `target`. Returns the number of tensors copied.
std::size_t copy_matching_parameters(const ParameterSet& source, ParameterSet& target);

}  // namespace pointcpr
