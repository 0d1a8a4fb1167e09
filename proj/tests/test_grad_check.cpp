#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pointcpr/errors.hpp"
#include "pointcpr/grad_check.hpp"
#include "pointcpr/ops.hpp"
#include "pointcpr/pretrain.hpp"

using namespace pointcpr;

TEST(GradCheck, SumHasAllOnesGradient) {
  ParameterSet params;
  std::mt19937_64 rng(0);
  Tensor x = params.add("x", oracle::random_tensor({3, 4}, rng));
  auto report = grad_check([&] { return sum(x); }, params.items(), 1e-8);
  EXPECT_TRUE(report.passed());
  EXPECT_LT(report.max_rel_error, 1e-9);
  {
    GradTape tape;
    tape.backward(sum(x));
  }
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(GradCheck, WrongBackwardIsCaught) {
  ParameterSet params;
  std::mt19937_64 rng(1);
  Tensor x = params.add("x", oracle::random_tensor({5}, rng));
  // y = x^2 with a backward rule that forgets the factor 2.
  auto broken_square = [](const Tensor& a) {
    std::vector<double> v(a.data().begin(), a.data().end());
    for (double& e : v) e *= e;
    std::vector<double> keep(a.data().begin(), a.data().end());
    return Tensor::make_result(a.shape(), std::move(v), {a}, [keep](const BackwardContext& ctx) {
      for (std::size_t i = 0; i < keep.size(); ++i) ctx.input_grads[0][i] += ctx.out_grad[i] * keep[i];
    });
  };
  auto report = grad_check([&] { return sum(broken_square(x)); }, params.items(), 1e-4);
  EXPECT_FALSE(report.passed());
  EXPECT_GT(report.max_rel_error, 0.1);
  EXPECT_EQ(report.worst, "x");
}

TEST(GradCheck, NonFiniteObjectiveThrows) {
  ParameterSet params;
  Tensor x = params.add("x", Tensor({1}, {1.0}));
  auto f = [&] { return scale(sum(x), std::numeric_limits<double>::infinity()); };
  EXPECT_THROW(grad_check(f, params.items(), 1e-4), NumericError);
}

TEST(GradCheck, TinyPretrainLossEndToEnd) {
  const ModelConfig cfg = tiny_config();
  PointCprModel model = build_model(cfg, ModelTarget::full_pretrain, 3);
  std::mt19937_64 rng(3);
  const PointCloud cloud(oracle::random_points(cfg.num_points, rng));
  const PatchSet patches = prepare_patches(cloud, cfg);
  const MaskPartition mask = make_mask(cfg.num_patches, cfg.mask_ratio, 5);
  auto report = grad_check([&] { return pretrain_forward(patches, mask, model).loss.total; }, model.params.items(),
                           1e-4);
  EXPECT_TRUE(report.passed()) << report.worst << " " << report.max_rel_error;
  EXPECT_EQ(report.entries.size(), model.params.size());
}
