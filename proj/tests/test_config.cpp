#include <gtest/gtest.h>

#include "pointcpr/config.hpp"
#include "pointcpr/errors.hpp"

using namespace pointcpr;

TEST(Config, PresetsValidate) {
  for (const ModelConfig& c : {ModelConfig{}, reference_config(), transformer_baseline_config(), tiny_config(), toy_config()})
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, TinyMatchesStatedShape) {
  const ModelConfig c = tiny_config();
  EXPECT_EQ(c.num_patches, 8u);
  EXPECT_EQ(c.patch_size, 4u);
  EXPECT_EQ(c.dim, 16u);
  EXPECT_EQ(c.encoder_depth, 2u);
  EXPECT_EQ(c.decoder_depth, 1u);
}

TEST(Config, MaskedCountUsesRounding) {
  ModelConfig c;
  c.num_patches = 64;
  c.mask_ratio = 0.6;
  EXPECT_EQ(c.masked_count(), 38u);
  EXPECT_EQ(c.visible_count(), 26u);
}

TEST(Config, TextRoundTrip) {
  ModelConfig c = toy_config();
  c.lam_hidden = {48, 40};
  c.decoder = DecoderKind::vanilla_nopos;
  c.mask_query = MaskQueryMode::shared;
  c.fps_start = FpsStart::farthest;
  c.optim.lr = 3.25e-4;
  c.seed = 18446744073709551615ULL;
  EXPECT_EQ(parse_config(config_to_text(c)), c);
}

TEST(Config, CommentsAndBlankLines) {
  const ModelConfig c = parse_config("# header\n\n dim = 48   # trailing\nheads=4\n");
  EXPECT_EQ(c.dim, 48u);
  EXPECT_EQ(c.heads, 4u);
}

TEST(Config, ParseErrorsNameTheLine) {
  try {
    parse_config("dim = 8\nbogus = 1\n", "cfg.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.source(), "cfg.txt");
  }
  EXPECT_THROW(parse_config("dim = -3"), ParseError);
  EXPECT_THROW(parse_config("dim"), ParseError);
  EXPECT_THROW(parse_config("mask_ratio = nan"), ParseError);
  EXPECT_THROW(parse_config("decoder = fancy"), ParseError);
}

TEST(Config, ValidationRejectsInconsistencies) {
  auto bad = [](auto mutate) {
    ModelConfig c = toy_config();
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  bad([](ModelConfig& c) { c.classes = 1; });
  bad([](ModelConfig& c) { c.dim = 30; });
  bad([](ModelConfig& c) { c.mask_ratio = 0.0; });
  bad([](ModelConfig& c) { c.mask_ratio = 0.99; });
  bad([](ModelConfig& c) { c.num_patches = 300; });
  bad([](ModelConfig& c) { c.lam_k = 16; });
  bad([](ModelConfig& c) { c.encoder_depth = 0; });
  bad([](ModelConfig& c) { c.format_version = 2; });
}

TEST(Config, Overrides) {
  ModelConfig c;
  apply_override(c, " dim=64 ");
  apply_override(c, "lam_hidden=96,80");
  EXPECT_EQ(c.dim, 64u);
  EXPECT_EQ(c.lam_hidden, (std::vector<std::size_t>{96, 80}));
  EXPECT_THROW(apply_override(c, "nokey=1"), ConfigError);
  const auto keys = config_keys();
  EXPECT_NE(std::find(keys.begin(), keys.end(), "mask_query"), keys.end());
}
