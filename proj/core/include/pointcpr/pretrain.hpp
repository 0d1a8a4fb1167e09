#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "pointcpr/model.hpp"
#include "pointcpr/optimizer.hpp"

namespace pointcpr {

/// Mean over masked patches of per-patch chamfer_l2. r_s, p_m: [masked, K, 3].
Tensor semantic_term(const Tensor& r_s, const Tensor& p_m);
/// chamfer_l2 between predicted and true masked centres as unordered sets. [masked, 3].
Tensor position_term(const Tensor& r_p, const Tensor& c_m);

struct LossTerms {
  Tensor total;
  Tensor semantic;
  Tensor position;
};

LossTerms reconstruction_loss(const Tensor& r_s, const Tensor& r_p, const Tensor& p_m, const Tensor& c_m);

struct HeadOutputs {
  Tensor semantic;  // [masked, K, 3]
  Tensor position;  // [masked, 3]
};

HeadOutputs apply_heads(const Tensor& r, const ReconHeads& heads, std::size_t patch_size);

/// Decoder output R [masked, d] for the configured decoder. The partial
/// decoder reads only the number of masked patches; the vanilla decoder
/// with positions also reads their centres.
Tensor decode_masked(const PointCprModel& model, const PatchSet& patches, const MaskPartition& mask);

struct PretrainForward {
  LossTerms loss;
  HeadOutputs prediction;
};

/// Encoder, decoder, heads and loss for one patched cloud.
PretrainForward pretrain_forward(const PatchSet& patches, const MaskPartition& mask, const PointCprModel& model);

/// Normalizes and patchifies `cloud`, draws a mask from `mask_seed`, and
/// runs pretrain_forward.
LossTerms pretrain_loss(const PointCloud& cloud, const PointCprModel& model, std::uint64_t mask_seed);

struct LossRecord {
  std::size_t step = 0;
  double total = 0.0;
  double semantic = 0.0;
  double position = 0.0;
  double lr = 0.0;
};

struct TrainState {
  PointCprModel model;
  AdamW optimizer;
  std::size_t step = 0;
  std::uint64_t seed = 0;
  std::vector<LossRecord> history;
};

/// Builds a full-pretrain model and a fresh optimizer.
TrainState make_train_state(const ModelConfig& config, std::uint64_t seed);

/// Mask seed for cloud `index` of the batch at `step`.
std::uint64_t mask_seed_for(std::uint64_t seed, std::size_t step, std::size_t index);

/// One AdamW step on the mean loss over `batch`. Throws NumericError with
/// a diagnostics dump if the loss is not finite.
LossRecord train_step(TrainState& state, std::span<const PatchSet> batch);
LossRecord train_step(TrainState& state, std::span<const PointCloud> batch);

/// Runs `steps` steps cycling through `data` in seeded shuffled order.
void pretrain(TrainState& state, std::span<const PatchSet> data, std::size_t steps);

/// CSV with header "step,total,semantic,position,lr".
void write_loss_log(std::ostream& out, std::span<const LossRecord> records);

}  // namespace pointcpr
