#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pointcpr/ablation.hpp"
#include "pointcpr/decoder.hpp"
#include "pointcpr/errors.hpp"
#include "pointcpr/grad_check.hpp"
#include "pointcpr/ops.hpp"
#include "pointcpr/pretrain.hpp"

using namespace pointcpr;

namespace {

PatchSet random_patches(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return prepare_patches(PointCloud(oracle::random_points(cfg.num_points, rng)), cfg);
}

void zero(Tensor t) {
  auto d = t.mutable_data();
  std::fill(d.begin(), d.end(), 0.0);
}

}  // namespace

class PpmTest : public ::testing::Test {
 protected:
  ModelConfig cfg = tiny_config();
  ParameterSet params;
  Initializer init{31};
  DecoderWeights w = make_partial_decoder(params, cfg, init);
  std::mt19937_64 rng{31};
};

TEST_F(PpmTest, TokenCountPreserved) {
  const DecoderState s{oracle::random_tensor({8, cfg.dim}, rng), 3, oracle::random_tensor({3, cfg.dim}, rng)};
  const DecoderState out = ppm(s, w.layers[0].ppm);
  EXPECT_EQ(out.tokens.shape(), (Shape{8, cfg.dim}));
  EXPECT_EQ(out.visible_count, 3u);
  EXPECT_EQ(out.masked_count(), 5u);
}

TEST_F(PpmTest, VisibleSliceIsNormalizedKeys) {
  const Tensor tokens = oracle::random_tensor({5, cfg.dim}, rng);
  const Tensor pos = oracle::random_tensor({2, cfg.dim}, rng);
  const DecoderState out = ppm(DecoderState{tokens, 2, pos}, w.layers[0].ppm);
  const Tensor expected = layer_norm(add(slice(tokens, 0, 0, 2), pos), w.layers[0].ppm.norm_visible);
  EXPECT_TRUE(oracle::bit_equal(slice(out.tokens, 0, 0, 2).data(), expected.data()));
}

TEST_F(PpmTest, SingleQueryIsFunctionOfKeysAndQuery) {
  // One query: self-attention over a single token reduces to its projected value.
  const auto& p = w.layers[0].ppm;
  const Tensor tokens = oracle::random_tensor({4, cfg.dim}, rng);
  const Tensor pos = oracle::random_tensor({3, cfg.dim}, rng);
  const DecoderState out = ppm(DecoderState{tokens, 3, pos}, p);

  const Tensor kv = layer_norm(add(slice(tokens, 0, 0, 3), pos), p.norm_visible);
  Tensor q = slice(tokens, 0, 3, 4);
  q = add(q, linear(linear(layer_norm(q, p.norm_query), p.self_attention.value), p.self_attention.output));
  q = add(q, multi_head_attention(q, kv, kv, p.cross_attention));
  q = add(q, mlp_forward(layer_norm(q, p.norm_ffn), p.ffn));
  const Tensor got = slice(out.tokens, 0, 3, 4);
  for (std::size_t i = 0; i < cfg.dim; ++i) EXPECT_NEAR(got.data()[i], q.data()[i], 1e-12);
}

TEST_F(PpmTest, GradientCheck) {
  const Tensor tokens = oracle::random_tensor({6, cfg.dim}, rng);
  const Tensor pos = oracle::random_tensor({2, cfg.dim}, rng);
  const Tensor probe = oracle::random_tensor({6, cfg.dim}, rng);
  ParameterSet only;
  for (const auto& prm : params.items())
    if (prm.name.find(".ppm.") != std::string::npos) only.add(prm.name, prm.tensor);
  auto rep = grad_check([&] { return sum(mul(ppm(DecoderState{tokens, 2, pos}, w.layers[0].ppm).tokens, probe)); },
                        only.items(), 1e-4);
  EXPECT_TRUE(rep.passed()) << rep.worst << " " << rep.max_rel_error;
}

TEST_F(PpmTest, RejectsDegenerateStates) {
  const Tensor t = oracle::random_tensor({3, cfg.dim}, rng);
  EXPECT_THROW(ppm(DecoderState{t, 0, Tensor({1, cfg.dim})}, w.layers[0].ppm), ArgumentError);
  EXPECT_THROW(ppm(DecoderState{t, 3, oracle::random_tensor({3, cfg.dim}, rng)}, w.layers[0].ppm), ArgumentError);
  EXPECT_THROW(ppm(DecoderState{t, 2, oracle::random_tensor({1, cfg.dim}, rng)}, w.layers[0].ppm), DimensionError);
}

TEST_F(PpmTest, DecodeShapes) {
  const Tensor en = oracle::random_tensor({3, cfg.dim}, rng);
  const Tensor tp = oracle::random_tensor({3, cfg.dim}, rng);
  const Tensor table = oracle::random_tensor({cfg.num_patches, cfg.dim}, rng);
  EXPECT_EQ(decode(en, tp, 1, w, table).shape(), (Shape{1, cfg.dim}));
  EXPECT_EQ(decode(en, tp, 5, w, table).shape(), (Shape{5, cfg.dim}));
  EXPECT_THROW(decode(en, tp, cfg.num_patches + 1, w, table), ArgumentError);
  EXPECT_THROW(decode(en, tp, 0, w, table), ArgumentError);
}

TEST(MaskQueries, SharedRowIsBroadcast) {
  std::mt19937_64 rng(1);
  const Tensor row = oracle::random_tensor({1, 4}, rng);
  const Tensor q = mask_queries(row, 3);
  ASSERT_EQ(q.shape(), (Shape{3, 4}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(q.data()[i * 4 + j], row.data()[j]);
}

TEST(MaskQueries, PerSlotUsesLeadingRows) {
  std::mt19937_64 rng(2);
  const Tensor table = oracle::random_tensor({6, 4}, rng);
  EXPECT_TRUE(oracle::bit_equal(mask_queries(table, 2).data(), slice(table, 0, 0, 2).data()));
}

TEST(PartialDecoder, SharedQueryCollapsesSlots) {
  // Identical masked inputs stay identical through every layer.
  ModelConfig cfg = tiny_config();
  cfg.mask_query = MaskQueryMode::shared;
  const PointCprModel model = build_model(cfg, ModelTarget::full_pretrain, 4);
  const PatchSet patches = random_patches(cfg, 4);
  const Tensor r = decode_masked(model, patches, make_mask(cfg.num_patches, cfg.mask_ratio, 4));
  for (std::size_t i = 1; i < r.dim(0); ++i)
    for (std::size_t j = 0; j < cfg.dim; ++j) EXPECT_NEAR(r.data()[i * cfg.dim + j], r.data()[j], 1e-12);
}

TEST(PartialDecoder, PerSlotQueriesGiveDistinctSlots) {
  const ModelConfig cfg = tiny_config();
  const PointCprModel model = build_model(cfg, ModelTarget::full_pretrain, 4);
  const Tensor r = decode_masked(model, random_patches(cfg, 4), make_mask(cfg.num_patches, cfg.mask_ratio, 4));
  EXPECT_FALSE(oracle::bit_equal(slice(r, 0, 0, 1).data(), slice(r, 0, 1, 2).data()));
}

TEST(PartialDecoder, MaskedGeometryNeverLeaks) {
  for (MaskQueryMode mode : {MaskQueryMode::per_slot, MaskQueryMode::shared}) {
    ModelConfig cfg = tiny_config();
    cfg.mask_query = mode;
    const PointCprModel model = build_model(cfg, ModelTarget::full_pretrain, 5);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const PatchSet patches = random_patches(cfg, seed);
      const MaskPartition mask = make_mask(cfg.num_patches, cfg.mask_ratio, seed);
      EXPECT_TRUE(decoder_isolated(model, patches, mask, seed + 100)) << to_string(mode) << " seed " << seed;
    }
  }
}

TEST(VanillaDecoder, WithPositionsLeaks) {
  ModelConfig cfg = tiny_config();
  cfg.decoder = DecoderKind::vanilla;
  const PointCprModel model = build_model(cfg, ModelTarget::full_pretrain, 6);
  const PatchSet patches = random_patches(cfg, 6);
  const MaskPartition mask = make_mask(cfg.num_patches, cfg.mask_ratio, 6);
  EXPECT_FALSE(decoder_isolated(model, patches, mask, 7));
  EXPECT_EQ(decode_masked(model, patches, mask).shape(), (Shape{mask.masked.size(), cfg.dim}));
}

TEST(VanillaDecoder, NoPositionVariantIsIsolated) {
  ModelConfig cfg = tiny_config();
  cfg.decoder = DecoderKind::vanilla_nopos;
  const PointCprModel model = build_model(cfg, ModelTarget::full_pretrain, 6);
  EXPECT_TRUE(model.vanilla_decoder.masked_pos.layers.empty());
  const PatchSet patches = random_patches(cfg, 6);
  const MaskPartition mask = make_mask(cfg.num_patches, cfg.mask_ratio, 6);
  EXPECT_TRUE(decoder_isolated(model, patches, mask, 7));
}

TEST(VanillaDecoder, NoPositionEqualsZeroedPositionMlp) {
  ModelConfig cfg = tiny_config();
  cfg.decoder = DecoderKind::vanilla;
  const PointCprModel model = build_model(cfg, ModelTarget::full_pretrain, 8);
  for (const auto& l : model.vanilla_decoder.masked_pos.layers) {
    zero(l.weight);
    zero(l.bias);
  }
  std::mt19937_64 rng(8);
  const Tensor en = oracle::random_tensor({3, cfg.dim}, rng);
  const Tensor tp = oracle::random_tensor({3, cfg.dim}, rng);
  const Tensor centers = oracle::random_tensor({5, 3}, rng);
  const auto& vd = model.vanilla_decoder;
  const Tensor c = decode_vanilla(en, tp, 5, vd, model.embedding.mask_query, &centers, true);
  const Tensor b = decode_vanilla(en, tp, 5, vd, model.embedding.mask_query, nullptr, false);
  EXPECT_TRUE(oracle::bit_equal(b.data(), c.data()));
}

TEST(VanillaDecoder, MissingInputsRejected) {
  ModelConfig cfg = tiny_config();
  cfg.decoder = DecoderKind::vanilla_nopos;
  const PointCprModel model = build_model(cfg, ModelTarget::full_pretrain, 9);
  std::mt19937_64 rng(9);
  const Tensor en = oracle::random_tensor({3, cfg.dim}, rng);
  const Tensor centers = oracle::random_tensor({5, 3}, rng);
  EXPECT_THROW(decode_vanilla(en, en, 5, model.vanilla_decoder, model.embedding.mask_query, nullptr, true),
               ArgumentError);
  EXPECT_THROW(decode_vanilla(en, en, 5, model.vanilla_decoder, model.embedding.mask_query, &centers, true),
               ConfigError);
}
