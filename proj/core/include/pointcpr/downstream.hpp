#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pointcpr/model.hpp"
#include "pointcpr/synth.hpp"

namespace pointcpr {

struct AccuracyReport {
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  std::size_t epochs = 0;
  std::vector<double> epoch_loss;  // mean training loss per epoch
  std::size_t copied_tensors = 0;  // parameters initialized from `pretrained`
};

/// Builds a classifier model, copies every matching encoder/embedding
/// parameter from `pretrained` (none when null), trains end to end for
/// config.epochs with batch config.finetune_batch and peak lr
/// config.finetune_lr, then reports accuracy. Throws ConfigError if a
/// label does not fit the head or fewer than two classes are configured.
AccuracyReport finetune_classify(std::span<const LabeledCloud> train, std::span<const LabeledCloud> val,
                                 const ParameterSet* pretrained, const ModelConfig& config, std::uint64_t seed,
                                 PointCprModel* trained = nullptr);

std::size_t predict(const PointCprModel& model, const PointCloud& cloud);
double accuracy(const PointCprModel& model, std::span<const LabeledCloud> data);

/// Writes "metric,value" rows.
void write_accuracy_csv(std::ostream& out, const AccuracyReport& report);

struct CompletionRequest {
  PointCloud partial;
  std::size_t num_patches = 0;   // M; the partial is split into M - masked_slots patches
  std::size_t patch_size = 0;    // K
  std::size_t masked_slots = 0;  // patches to synthesize
  std::optional<PointCloud> ground_truth;
};

/// Request with the model's M, K and masked_slots = round(mask_ratio * M).
CompletionRequest make_completion_request(const PointCloud& partial, const ModelConfig& config);

struct PatchPrediction {
  std::vector<Point3> centers;    // [masked_slots]
  std::vector<Point3> relcoords;  // [masked_slots * K]
};

/// Predicts the missing patches from the visible patch set alone.
using PatchPredictor = std::function<PatchPrediction(const PatchSet& visible, std::size_t masked_slots)>;

struct CompletionResult {
  PointCloud completed;
  std::size_t visible_patches = 0;
  std::size_t synthesized_points = 0;
  std::vector<Point3> predicted_centers;
  std::optional<double> chamfer_l1;
  std::optional<double> chamfer_l2;
  std::optional<double> partial_chamfer_l2;  // partial input vs ground truth, for reference
};

/// The partial cloud is taken to be in the model's frame (no normalization).
/// Output = partial points followed by centers[i] + relcoords[i][j].
/// Ground truth, when present, is read only for the metrics.
CompletionResult complete(const CompletionRequest& request, const PatchPredictor& predictor,
                          FpsStart fps_start = FpsStart::first);
CompletionResult complete(const CompletionRequest& request, const PointCprModel& model);

/// Predictor backed by a pretrained model's encoder, decoder and heads.
PatchPredictor model_predictor(const PointCprModel& model);

}  // namespace pointcpr
