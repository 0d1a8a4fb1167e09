#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "pointcpr/downstream.hpp"
#include "pointcpr/errors.hpp"

using namespace pointcpr;

namespace {

std::vector<LabeledCloud> small_set(std::size_t per_class, std::uint64_t seed, std::size_t points = 32) {
  return synth_dataset({{ShapeKind::sphere, ShapeKind::plane, ShapeKind::cube}, per_class, points, 0.0, true, seed});
}

}  // namespace

TEST(Classify, RejectsSingleClassAndBadLabels) {
  ModelConfig cfg = tiny_config();
  cfg.epochs = 1;
  const auto data = small_set(2, 1);
  cfg.classes = 1;
  EXPECT_THROW(finetune_classify(data, data, nullptr, cfg, 0), ConfigError);
  cfg.classes = 2;
  EXPECT_THROW(finetune_classify(data, data, nullptr, cfg, 0), ConfigError);
}

TEST(Classify, TrainsOnTinyTask) {
  ModelConfig cfg = tiny_config();
  cfg.epochs = 15;
  cfg.finetune_batch = 4;
  cfg.finetune_lr = 3e-3;
  const auto data = small_set(8, 2);
  PointCprModel trained = build_model(cfg, ModelTarget::classifier, 0);
  const AccuracyReport r = finetune_classify(data, data, nullptr, cfg, 3, &trained);
  EXPECT_EQ(r.epochs, 15u);
  EXPECT_EQ(r.epoch_loss.size(), 15u);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  EXPECT_GT(r.train_accuracy, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(accuracy(trained, data), r.train_accuracy);
  EXPECT_LT(predict(trained, data[0].cloud), 3u);
}

TEST(Classify, PretrainedInitCopiesEncoder) {
  ModelConfig cfg = tiny_config();
  cfg.epochs = 1;
  const PointCprModel pre = build_model(cfg, ModelTarget::full_pretrain, 4);
  const auto data = small_set(2, 3);
  const AccuracyReport r = finetune_classify(data, data, &pre.params, cfg, 3);
  EXPECT_EQ(r.copied_tensors, pre.params.count_prefix("encoder.") == 0 ? 0u : r.copied_tensors);
  PointCprModel cls = build_model(cfg, ModelTarget::classifier, 9);
  const std::size_t copied = copy_matching_parameters(pre.params, cls.params);
  EXPECT_EQ(copied, r.copied_tensors);
  std::size_t expected = 0;
  for (const auto& p : cls.params.items()) expected += pre.params.contains(p.name);
  EXPECT_EQ(copied, expected);
  EXPECT_TRUE(oracle::bit_equal(cls.params.at("encoder.layers.0.ffn.0.weight").data(),
                                pre.params.at("encoder.layers.0.ffn.0.weight").data()));
}

// Normalization sums points in input order, so coordinates can move in the
// last bits; patch membership and order are unchanged.
TEST(Classify, LogitsInvariantToPointOrderWithFarthestStart) {
  ModelConfig cfg = tiny_config();
  cfg.fps_start = FpsStart::farthest;
  const PointCprModel model = build_model(cfg, ModelTarget::classifier, 5);
  std::mt19937_64 rng(5);
  auto pts = oracle::random_points(cfg.num_points, rng);
  const Tensor a = classify_logits(model, prepare_patches(PointCloud(pts), cfg));
  for (int i = 0; i < 10; ++i) {
    std::shuffle(pts.begin(), pts.end(), rng);
    const Tensor b = classify_logits(model, prepare_patches(PointCloud(pts), cfg));
    for (std::size_t j = 0; j < a.numel(); ++j) EXPECT_NEAR(a.data()[j], b.data()[j], 1e-9);
  }
}

TEST(Classify, AccuracyCsv) {
  AccuracyReport r;
  r.train_accuracy = 1.0;
  r.val_accuracy = 0.75;
  r.epochs = 2;
  std::ostringstream os;
  write_accuracy_csv(os, r);
  EXPECT_EQ(os.str().rfind("metric,value\n", 0), 0u);
  EXPECT_NE(os.str().find("val_accuracy,0.75"), std::string::npos);
}

TEST(Completion, TeacherForcedRigIsExact) {
  std::mt19937_64 rng(6);
  const auto full = oracle::random_points(64, rng);
  const PatchSet patches = patchify(PointCloud(full), 8, 8);
  // Remove two patches' worth of points; the rig predicts exactly those.
  std::vector<bool> removed(full.size(), false);
  for (std::size_t i : {2u, 5u})
    for (std::size_t j = 0; j < 8; ++j) removed[patches.source_indices[i * 8 + j]] = true;
  std::vector<Point3> partial, missing;
  for (std::size_t i = 0; i < full.size(); ++i) (removed[i] ? missing : partial).push_back(full[i]);

  CompletionRequest req{PointCloud(partial), 8, 8, 2, PointCloud(full)};
  auto rig = [&](const PatchSet& visible, std::size_t slots) {
    EXPECT_EQ(visible.num_patches, 6u);
    PatchPrediction p;
    for (std::size_t s = 0; s < slots; ++s) p.centers.push_back(missing.front());
    for (std::size_t j = 0; j < slots * 8; ++j) {
      const Point3& m = missing[j % missing.size()];
      p.relcoords.push_back({m[0] - missing.front()[0], m[1] - missing.front()[1], m[2] - missing.front()[2]});
    }
    return p;
  };
  const CompletionResult r = complete(req, rig);
  EXPECT_EQ(r.completed.size(), partial.size() + 16);
  EXPECT_EQ(r.synthesized_points, 16u);
  EXPECT_NEAR(*r.chamfer_l2, 0.0, 1e-24);
  EXPECT_NEAR(*r.chamfer_l1, 0.0, 1e-12);
  EXPECT_GT(*r.partial_chamfer_l2, 0.0);
}

TEST(Completion, ModelOutputCount) {
  const ModelConfig cfg = tiny_config();
  const PointCprModel model = build_model(cfg, ModelTarget::full_pretrain, 7);
  std::mt19937_64 rng(7);
  const PointCloud partial(oracle::random_points(20, rng));
  const CompletionRequest req = make_completion_request(partial, cfg);
  EXPECT_EQ(req.masked_slots, cfg.masked_count());
  const CompletionResult r = complete(req, model);
  EXPECT_EQ(r.completed.size(), 20 + cfg.masked_count() * cfg.patch_size);
  EXPECT_EQ(r.predicted_centers.size(), cfg.masked_count());
  EXPECT_FALSE(r.chamfer_l2);
}

TEST(Completion, RejectsUnsuitableModelsAndRequests) {
  ModelConfig cfg = tiny_config();
  const PointCprModel cls = build_model(cfg, ModelTarget::classifier, 1);
  EXPECT_THROW(model_predictor(cls), ConfigError);
  cfg.decoder = DecoderKind::vanilla;
  const PointCprModel leaky = build_model(cfg, ModelTarget::full_pretrain, 1);
  EXPECT_THROW(model_predictor(leaky), ConfigError);

  std::mt19937_64 rng(1);
  const PointCloud partial(oracle::random_points(4, rng));
  auto never = [](const PatchSet&, std::size_t) -> PatchPrediction { throw std::logic_error("unreachable"); };
  EXPECT_THROW(complete(CompletionRequest{partial, 8, 4, 0, {}}, never), ArgumentError);
  EXPECT_THROW(complete(CompletionRequest{partial, 8, 4, 8, {}}, never), ArgumentError);
  EXPECT_THROW(complete(CompletionRequest{partial, 8, 4, 2, {}}, never), ArgumentError);
}
