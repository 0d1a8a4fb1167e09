#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "pointcpr/errors.hpp"
#include "pointcpr/ops.hpp"
#include "pointcpr/optimizer.hpp"
#include "pointcpr/pretrain.hpp"
#include "pointcpr/synth.hpp"

using namespace pointcpr;

namespace {

std::vector<PatchSet> toy_set(const ModelConfig& cfg, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<PatchSet> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(prepare_patches(PointCloud(oracle::random_points(cfg.num_points, rng)), cfg));
  return out;
}

std::vector<double> flat_params(const ParameterSet& p) {
  std::vector<double> out;
  for (const auto& x : p.items()) out.insert(out.end(), x.tensor.data().begin(), x.tensor.data().end());
  return out;
}

}  // namespace

TEST(Loss, IdenticalInputsGiveZero) {
  std::mt19937_64 rng(0);
  const Tensor s = oracle::random_tensor({3, 4, 3}, rng);
  const Tensor c = oracle::random_tensor({3, 3}, rng);
  const LossTerms t = reconstruction_loss(s, c, s, c);
  EXPECT_EQ(t.total.item(), 0.0);
  EXPECT_EQ(t.semantic.item(), 0.0);
  EXPECT_EQ(t.position.item(), 0.0);
}

TEST(Loss, SingletonReducesToTwiceSquaredDistance) {
  const Tensor r({1, 1, 3}, {1, 2, 3});
  const Tensor p({1, 1, 3}, {0, 0, 1});
  EXPECT_DOUBLE_EQ(semantic_term(r, p).item(), 2.0 * (1 + 4 + 4));
  EXPECT_DOUBLE_EQ(position_term(Tensor({1, 3}, {1, 0, 0}), Tensor({1, 3}, {0, 0, 0})).item(), 2.0);
}

TEST(Loss, PositionTermIgnoresOrder) {
  std::mt19937_64 rng(1);
  const Tensor pred = oracle::random_tensor({5, 3}, rng);
  const Tensor truth = oracle::random_tensor({5, 3}, rng);
  const std::size_t perm[] = {4, 2, 0, 3, 1};
  EXPECT_NEAR(position_term(pred, truth).item(), position_term(gather_rows(pred, perm), truth).item(), 1e-15);
}

TEST(Loss, SemanticTermIsPerPatchMean) {
  std::mt19937_64 rng(2);
  const Tensor r = oracle::random_tensor({3, 4, 3}, rng);
  const Tensor p = oracle::random_tensor({3, 4, 3}, rng);
  double expected = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    expected += chamfer_l2(reshape(slice(r, 0, i, i + 1), {4, 3}), reshape(slice(p, 0, i, i + 1), {4, 3})).item();
  EXPECT_NEAR(semantic_term(r, p).item(), expected / 3.0, 1e-12);
}

TEST(Loss, FinitePositiveAtInit) {
  const ModelConfig cfg = tiny_config();
  const PointCprModel model = build_model(cfg, ModelTarget::full_pretrain, 1);
  std::mt19937_64 rng(1);
  const LossTerms t = pretrain_loss(PointCloud(oracle::random_points(cfg.num_points, rng)), model, 3);
  EXPECT_TRUE(std::isfinite(t.total.item()));
  EXPECT_GT(t.total.item(), 0.0);
  EXPECT_NEAR(t.total.item(), t.semantic.item() + t.position.item(), 1e-12);
}

TEST(Loss, TeacherForcedHeadsGiveZero) {
  const ModelConfig cfg = tiny_config();
  const PatchSet patches = toy_set(cfg, 1, 2).front();
  const MaskPartition mask = make_mask(cfg.num_patches, cfg.mask_ratio, 2);
  const Tensor truth_s = gather_relcoords(patches, mask.masked);
  const Tensor truth_c = gather_centers(patches, mask.masked);
  EXPECT_EQ(reconstruction_loss(truth_s, truth_c, truth_s, truth_c).total.item(), 0.0);
}

TEST(Heads, Shapes) {
  const ModelConfig cfg = tiny_config();
  const PointCprModel model = build_model(cfg, ModelTarget::full_pretrain, 1);
  std::mt19937_64 rng(1);
  const HeadOutputs h = apply_heads(oracle::random_tensor({5, cfg.dim}, rng), model.heads, cfg.patch_size);
  EXPECT_EQ(h.semantic.shape(), (Shape{5, cfg.patch_size, 3}));
  EXPECT_EQ(h.position.shape(), (Shape{5, 3}));
}

TEST(Schedule, WarmupAndCosine) {
  OptimizerConfig o;
  o.lr = 1e-3;
  o.min_lr = 1e-5;
  o.warmup_steps = 10;
  o.schedule_steps = 110;
  EXPECT_DOUBLE_EQ(cosine_lr(0, o), 1e-4);
  EXPECT_DOUBLE_EQ(cosine_lr(9, o), 1e-3);
  EXPECT_DOUBLE_EQ(cosine_lr(10, o), 1e-3);
  EXPECT_NEAR(cosine_lr(60, o), 1e-5 + 0.5 * (1e-3 - 1e-5), 1e-15);
  EXPECT_DOUBLE_EQ(cosine_lr(110, o), 1e-5);
  EXPECT_DOUBLE_EQ(cosine_lr(500, o), 1e-5);
  o.lr = 0.0;
  EXPECT_EQ(cosine_lr(50, o), 0.0);
}

TEST(AdamW, MatchesHandUpdate) {
  ParameterSet params;
  Tensor w = params.add("w", Tensor({1, 2}, {0.5, -1.0}));
  Tensor b = params.add("b", Tensor({2}, {0.5, -1.0}));
  OptimizerConfig o;
  o.weight_decay = 0.1;
  AdamW opt(params, o);
  auto gw = w.mutable_grad();
  auto gb = b.mutable_grad();
  gw[0] = gb[0] = 2.0;
  gw[1] = gb[1] = -0.5;
  opt.step(params, 0.01);
  // First step: m_hat = g, v_hat = g^2, update = g / (|g| + eps).
  const double u0 = 2.0 / (2.0 + 1e-8), u1 = -0.5 / (0.5 + 1e-8);
  EXPECT_NEAR(w.data()[0], 0.5 - 0.01 * 0.1 * 0.5 - 0.01 * u0, 1e-15);
  EXPECT_NEAR(w.data()[1], -1.0 + 0.01 * 0.1 * 1.0 - 0.01 * u1, 1e-15);
  EXPECT_NEAR(b.data()[0], 0.5 - 0.01 * u0, 1e-15);  // rank-1: not decayed
  EXPECT_EQ(opt.steps_taken(), 1u);
}

TEST(AdamW, SkipsFrozenParameters) {
  ParameterSet params;
  Tensor w = params.add("w", Tensor({1, 1}, {1.0}), false);
  AdamW opt(params, OptimizerConfig{});
  w.mutable_grad()[0] = 1.0;
  opt.step(params, 0.1);
  EXPECT_EQ(w.data()[0], 1.0);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  ModelConfig cfg = tiny_config();
  cfg.optim.lr = 0.0;
  TrainState state = make_train_state(cfg, 1);
  const auto before = flat_params(state.model.params);
  const auto data = toy_set(cfg, 4, 1);
  pretrain(state, data, 3);
  EXPECT_EQ(flat_params(state.model.params), before);
  EXPECT_EQ(state.step, 3u);
}

TEST(Train, SameSeedSameTrajectory) {
  const ModelConfig cfg = tiny_config();
  const auto data = toy_set(cfg, 6, 2);
  TrainState a = make_train_state(cfg, 9);
  TrainState b = make_train_state(cfg, 9);
  pretrain(a, data, 5);
  pretrain(b, data, 5);
  ASSERT_EQ(a.history.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(a.history[i].total, b.history[i].total);
  EXPECT_EQ(flat_params(a.model.params), flat_params(b.model.params));
}

TEST(Train, LossGoesDownOnTinyData) {
  ModelConfig cfg = tiny_config();
  cfg.optim.schedule_steps = 60;
  const auto data = toy_set(cfg, 4, 3);
  TrainState s = make_train_state(cfg, 3);
  pretrain(s, data, 60);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    first += s.history[i].total;
    last += s.history[s.history.size() - 1 - i].total;
  }
  EXPECT_LT(last, first);
}

TEST(Train, NonFiniteLossReportsDiagnostics) {
  const ModelConfig cfg = tiny_config();
  TrainState s = make_train_state(cfg, 4);
  s.model.heads.position.layers.back().bias.mutable_data()[0] = std::numeric_limits<double>::infinity();
  const auto data = toy_set(cfg, 1, 4);
  try {
    train_step(s, std::span<const PatchSet>(data));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("step 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("params_finite=no"), std::string::npos) << msg;
  }
}

TEST(Train, EmptyInputsRejected) {
  TrainState s = make_train_state(tiny_config(), 0);
  EXPECT_THROW(train_step(s, std::span<const PatchSet>()), ArgumentError);
  EXPECT_THROW(pretrain(s, std::span<const PatchSet>(), 1), ArgumentError);
}

TEST(Train, MaskSeedsDiffer) {
  EXPECT_NE(mask_seed_for(1, 0, 0), mask_seed_for(1, 0, 1));
  EXPECT_NE(mask_seed_for(1, 0, 0), mask_seed_for(1, 1, 0));
  EXPECT_NE(mask_seed_for(1, 0, 0), mask_seed_for(2, 0, 0));
  EXPECT_EQ(mask_seed_for(5, 3, 2), mask_seed_for(5, 3, 2));
}

TEST(Train, LossLogFormat) {
  std::ostringstream os;
  const LossRecord r{1, 0.5, 0.25, 0.25, 1e-3};
  write_loss_log(os, std::span(&r, 1));
  EXPECT_EQ(os.str(), "step,total,semantic,position,lr\n1,0.5,0.25,0.25,0.001\n");
}
