#include <gtest/gtest.h>

#include <sstream>

#include "pointcpr/costs.hpp"

using namespace pointcpr;

TEST(Costs, ReferenceCompactModelSize) {
  const CostReport r = count_costs(reference_config(), ModelTarget::classifier);
  EXPECT_GE(r.total_params, 2'300'000u);
  EXPECT_LE(r.total_params, 3'100'000u);
  ASSERT_TRUE(r.enumerated_params);
  EXPECT_EQ(*r.enumerated_params, r.total_params);
}

TEST(Costs, TransformerBaselineSize) {
  const CostReport r = count_costs(transformer_baseline_config(), ModelTarget::classifier);
  EXPECT_NEAR(static_cast<double>(r.total_params), 22.1e6, 2.21e6);
  EXPECT_EQ(*r.enumerated_params, r.total_params);
}

TEST(Costs, EnumerationMatchesForEveryVariant) {
  for (ModelTarget t : {ModelTarget::encoder_only, ModelTarget::full_pretrain, ModelTarget::classifier})
    for (DecoderKind d : {DecoderKind::partial, DecoderKind::vanilla, DecoderKind::vanilla_nopos})
      for (MaskQueryMode q : {MaskQueryMode::per_slot, MaskQueryMode::shared})
        for (EncoderKind e : {EncoderKind::compact, EncoderKind::transformer}) {
          ModelConfig c = toy_config();
          c.decoder = d;
          c.mask_query = q;
          c.encoder = e;
          c.lam_hidden = {40};
          const CostReport r = count_costs(c, t);
          EXPECT_EQ(*r.enumerated_params, r.total_params) << to_string(t) << " " << to_string(d);
        }
}

TEST(Costs, DepthIsLinear) {
  ModelConfig c = reference_config();
  auto encoder_params = [](const CostReport& r) {
    for (const auto& m : r.modules)
      if (m.module == "encoder") return m.params;
    return std::size_t{0};
  };
  const std::size_t one = encoder_params(count_costs(c, ModelTarget::encoder_only, false));
  c.encoder_depth *= 2;
  const std::size_t two = encoder_params(count_costs(c, ModelTarget::encoder_only, false));
  EXPECT_EQ(two, 2 * one);
  EXPECT_EQ(one, reference_config().encoder_depth * compact_layer_params(reference_config()));
}

TEST(Costs, CompactIsSmallerAndCheaper) {
  const CostReport compact = count_costs(reference_config(), ModelTarget::classifier, false);
  const CostReport base = count_costs(transformer_baseline_config(), ModelTarget::classifier, false);
  EXPECT_LT(compact.total_params * 5, base.total_params);
  EXPECT_LT(compact.flops.total(), base.flops.total());
  EXPECT_GT(compact.flops.knn, 0.0);
  EXPECT_EQ(compact.flops.attention, 0.0);
  EXPECT_GT(base.flops.attention, 0.0);
}

TEST(Costs, SingleLinearLayerFlops) {
  // The classifier head's last layer is hidden x classes; adding one class adds 2*hidden FLOPs.
  ModelConfig c = toy_config();
  const double f4 = count_costs(c, ModelTarget::classifier, false).flops.matmul;
  c.classes = 5;
  const double f5 = count_costs(c, ModelTarget::classifier, false).flops.matmul;
  EXPECT_DOUBLE_EQ(f5 - f4, 2.0 * static_cast<double>(c.cls_hidden));
}

TEST(Costs, TableAndCsv) {
  const CostReport r = count_costs(toy_config(), ModelTarget::full_pretrain);
  const std::string table = format_cost_table(r);
  EXPECT_NE(table.find("match"), std::string::npos);
  EXPECT_NE(table.find("decoder"), std::string::npos);
  std::ostringstream os;
  write_cost_csv(os, r);
  EXPECT_EQ(os.str().rfind("section,name,value\n", 0), 0u);
  EXPECT_NE(os.str().find("params,total," + std::to_string(r.total_params)), std::string::npos);
  EXPECT_NE(os.str().find("flops,total,"), std::string::npos);
}
