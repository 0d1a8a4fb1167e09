#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pointcpr {

enum class EncoderKind { compact, transformer };
/// partial: partial-aware decoder. vanilla / vanilla_nopos: Transformer
/// decoder with a broadcast mask token, with or without masked-centre
/// positional embeddings.
enum class DecoderKind { partial, vanilla, vanilla_nopos };
/// per_slot: one learned query row per masked slot. shared: a single
/// learned row broadcast to every slot.
enum class MaskQueryMode { per_slot, shared };
/// Which point FPS starts from: the cloud's first point, or the point
/// farthest from the centroid (order independent).
enum class FpsStart { first, farthest };

struct OptimizerConfig {
  double lr = 1e-3;
  double min_lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
  std::size_t warmup_steps = 0;
  /// Length of the cosine schedule.
  std::size_t schedule_steps = 200;

  bool operator==(const OptimizerConfig&) const = default;
};

struct ModelConfig {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;

  std::size_t num_points = 1024;
  std::size_t num_patches = 64;
  std::size_t patch_size = 32;
  double mask_ratio = 0.6;

  std::size_t dim = 192;
  std::size_t encoder_depth = 6;
  std::size_t decoder_depth = 4;
  std::size_t lam_k = 8;
  /// Hidden widths of the LAM local MLP between 2d and d (empty: one layer).
  std::vector<std::size_t> lam_hidden;
  std::size_t heads = 6;
  std::size_t ffn_ratio = 4;

  std::size_t embed_hidden1 = 64;
  std::size_t embed_hidden2 = 128;
  std::size_t pos_hidden = 128;
  std::size_t recon_hidden = 192;
  std::size_t cls_hidden = 256;
  std::size_t classes = 15;

  EncoderKind encoder = EncoderKind::compact;
  DecoderKind decoder = DecoderKind::partial;
  MaskQueryMode mask_query = MaskQueryMode::per_slot;
  FpsStart fps_start = FpsStart::first;

  OptimizerConfig optim;
  std::size_t steps = 200;
  std::size_t batch_size = 8;
  std::size_t epochs = 30;
  std::size_t finetune_batch = 16;
  double finetune_lr = 1e-3;
  std::size_t pretrain_clouds = 32;

  std::uint64_t seed = 0;

  std::size_t masked_count() const;
  std::size_t visible_count() const { return num_patches - masked_count(); }

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Desk-scale stand-in for the published compact model (~2.7M parameters).
ModelConfig reference_config();
/// Point-MAE-sized Transformer encoder baseline (d=384, 12 layers).
ModelConfig transformer_baseline_config();
/// M=8, K=4, d=16, n=2, m=1; for gradient checks.
ModelConfig tiny_config();
/// Small configuration that trains in seconds on one core.
ModelConfig toy_config();

/// `key = value` per line; `#` starts a comment.
std::string config_to_text(const ModelConfig& config);
ModelConfig parse_config(std::string_view text, const std::string& source = "<config>");
ModelConfig load_config(const std::string& path);
/// Applies one `key=value` assignment.
void apply_override(ModelConfig& config, std::string_view assignment);
std::vector<std::string> config_keys();

std::string to_string(EncoderKind kind);
std::string to_string(DecoderKind kind);
std::string to_string(MaskQueryMode mode);
std::string to_string(FpsStart start);

}  // namespace pointcpr
