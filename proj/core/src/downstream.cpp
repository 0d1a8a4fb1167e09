#include "pointcpr/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

#include "pointcpr/errors.hpp"
#include "pointcpr/ops.hpp"
#include "pointcpr/optimizer.hpp"
#include "pointcpr/pretrain.hpp"

namespace pointcpr {

namespace {

std::size_t argmax_row(const Tensor& logits) {
  auto d = logits.data();
  return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

std::size_t count_correct(const PointCprModel& model, std::span<const PatchSet> patches,
                          std::span<const LabeledCloud> data) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (argmax_row(classify_logits(model, patches[i])) == data[i].label) ++correct;
  }
  return correct;
}

std::vector<PatchSet> patch_all(std::span<const LabeledCloud> data, const ModelConfig& config) {
  std::vector<PatchSet> out;
  out.reserve(data.size());
  for (const auto& d : data) out.push_back(prepare_patches(d.cloud, config));
  return out;
}

}  // namespace

AccuracyReport finetune_classify(std::span<const LabeledCloud> train, std::span<const LabeledCloud> val,
                                 const ParameterSet* pretrained, const ModelConfig& config, std::uint64_t seed,
                                 PointCprModel* trained) {
  if (config.classes < 2) throw ConfigError("classification needs at least 2 classes, got " +
                                            std::to_string(config.classes));
  if (train.empty()) throw ArgumentError("finetune_classify: empty training set");
  for (auto set : {train, val}) {
    for (const auto& d : set) {
      if (d.label >= config.classes) {
        throw ConfigError("label " + std::to_string(d.label) + " does not fit a head with " +
                          std::to_string(config.classes) + " classes");
      }
    }
  }

  PointCprModel model = build_model(config, ModelTarget::classifier, seed);
  AccuracyReport report;
  if (pretrained != nullptr) report.copied_tensors = copy_matching_parameters(*pretrained, model.params);

  const std::vector<PatchSet> train_patches = patch_all(train, config);
  const std::vector<PatchSet> val_patches = patch_all(val, config);

  const std::size_t batch = std::max<std::size_t>(1, std::min(config.finetune_batch, train.size()));
  const std::size_t per_epoch = (train.size() + batch - 1) / batch;
  OptimizerConfig optim = config.optim;
  optim.lr = config.finetune_lr;
  optim.schedule_steps = config.epochs * per_epoch;
  optim.warmup_steps = std::min(optim.warmup_steps, optim.schedule_steps / 10);
  AdamW adam(model.params, optim);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0xc1a55ULL);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      model.params.zero_grad();
      {
        GradTape tape;
        std::vector<Tensor> rows;
        std::vector<std::size_t> labels;
        for (std::size_t j = start; j < end; ++j) {
          rows.push_back(classify_logits(model, train_patches[order[j]]));
          labels.push_back(train[order[j]].label);
        }
        Tensor loss = cross_entropy(concat(rows, 0), labels);
        const double lv = loss.item();
        if (!std::isfinite(lv)) {
          throw NumericError("non-finite classification loss at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(step));
        }
        epoch_loss += lv * static_cast<double>(end - start);
        tape.backward(loss);
      }
      adam.step(model.params, cosine_lr(step, optim));
      ++step;
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(train.size()));
  }
  report.epochs = config.epochs;
  report.train_accuracy =
      static_cast<double>(count_correct(model, train_patches, train)) / static_cast<double>(train.size());
  report.val_accuracy = val.empty() ? 0.0
                                    : static_cast<double>(count_correct(model, val_patches, val)) /
                                          static_cast<double>(val.size());
  if (trained != nullptr) *trained = std::move(model);
  return report;
}

std::size_t predict(const PointCprModel& model, const PointCloud& cloud) {
  return argmax_row(classify_logits(model, prepare_patches(cloud, model.config)));
}

double accuracy(const PointCprModel& model, std::span<const LabeledCloud> data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& d : data) correct += predict(model, d.cloud) == d.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

void write_accuracy_csv(std::ostream& out, const AccuracyReport& report) {
  out << "metric,value\n";
  out << "epochs," << report.epochs << "\n";
  out << "train_accuracy," << report.train_accuracy << "\n";
  out << "val_accuracy," << report.val_accuracy << "\n";
  out << "pretrained_tensors," << report.copied_tensors << "\n";
  if (!report.epoch_loss.empty()) out << "final_loss," << report.epoch_loss.back() << "\n";
}

CompletionRequest make_completion_request(const PointCloud& partial, const ModelConfig& config) {
  return CompletionRequest{partial, config.num_patches, config.patch_size, config.masked_count(), std::nullopt};
}

CompletionResult complete(const CompletionRequest& req, const PatchPredictor& predictor, FpsStart fps_start) {
  if (req.masked_slots == 0) throw ArgumentError("complete: at least one masked slot must be synthesized");
  if (req.masked_slots >= req.num_patches) {
    throw ArgumentError("complete: " + std::to_string(req.masked_slots) + " masked slots leave no visible patches of " +
                        std::to_string(req.num_patches));
  }
  if (req.patch_size == 0) throw ArgumentError("complete: patch size must be >= 1");
  const std::size_t visible = req.num_patches - req.masked_slots;
  if (req.partial.size() < visible || req.partial.size() < req.patch_size) {
    throw ArgumentError("complete: partial cloud of " + std::to_string(req.partial.size()) +
                        " points cannot form " + std::to_string(visible) + " patches of " +
                        std::to_string(req.patch_size) + " points");
  }
  const PatchSet patches =
      patchify(req.partial, visible, req.patch_size, fps_start_index(req.partial, fps_start));
  PatchPrediction pred = predictor(patches, req.masked_slots);
  if (pred.centers.size() != req.masked_slots || pred.relcoords.size() != req.masked_slots * req.patch_size) {
    throw DimensionError("complete: predictor returned " + std::to_string(pred.centers.size()) + " centres and " +
                         std::to_string(pred.relcoords.size()) + " points for " + std::to_string(req.masked_slots) +
                         " slots of " + std::to_string(req.patch_size));
  }

  std::vector<Point3> out(req.partial.points());
  out.reserve(out.size() + pred.relcoords.size());
  for (std::size_t i = 0; i < req.masked_slots; ++i) {
    for (std::size_t j = 0; j < req.patch_size; ++j) {
      const Point3& r = pred.relcoords[i * req.patch_size + j];
      const Point3& c = pred.centers[i];
      out.push_back({c[0] + r[0], c[1] + r[1], c[2] + r[2]});
    }
  }

  CompletionResult result{PointCloud(std::move(out)), visible, pred.relcoords.size(), std::move(pred.centers),
                          std::nullopt, std::nullopt, std::nullopt};
  if (req.ground_truth) {
    const auto& gt = req.ground_truth->points();
    result.chamfer_l1 = chamfer_l1(result.completed.points(), gt);
    result.chamfer_l2 = chamfer_l2(result.completed.points(), gt);
    result.partial_chamfer_l2 = chamfer_l2(req.partial.points(), gt);
  }
  return result;
}

PatchPredictor model_predictor(const PointCprModel& model) {
  if (!model.has_decoder()) throw ConfigError("completion needs a model with a decoder and reconstruction heads");
  if (model.config.decoder == DecoderKind::vanilla) {
    throw ConfigError("completion cannot use a decoder that requires masked-patch positions");
  }
  return [&model](const PatchSet& visible, std::size_t masked_slots) {
    const MaskPartition all = all_visible(visible.num_patches);
    const Tensor en = encode_visible(model, visible, all);
    const Tensor tp = embed_position(gather_centers(visible, all.visible), model.embedding, PositionTable::decoder);
    const Tensor r = model.config.decoder == DecoderKind::partial
                         ? decode(en, tp, masked_slots, model.decoder, model.embedding.mask_query)
                         : decode_vanilla(en, tp, masked_slots, model.vanilla_decoder, model.embedding.mask_query,
                                          nullptr, false);
    const HeadOutputs heads = apply_heads(r, model.heads, visible.patch_size);
    PatchPrediction pred;
    auto c = heads.position.data();
    auto s = heads.semantic.data();
    for (std::size_t i = 0; i < masked_slots; ++i) pred.centers.push_back({c[3 * i], c[3 * i + 1], c[3 * i + 2]});
    for (std::size_t i = 0; i < s.size() / 3; ++i) pred.relcoords.push_back({s[3 * i], s[3 * i + 1], s[3 * i + 2]});
    return pred;
  };
}

CompletionResult complete(const CompletionRequest& request, const PointCprModel& model) {
  if (request.patch_size != model.config.patch_size) {
    throw ConfigError("complete: request patch size " + std::to_string(request.patch_size) +
                      " differs from the model's " + std::to_string(model.config.patch_size));
  }
  return complete(request, model_predictor(model), model.config.fps_start);
}

}  // namespace pointcpr
