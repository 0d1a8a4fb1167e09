#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "pointcpr/checkpoint.hpp"
#include "pointcpr/errors.hpp"

using namespace pointcpr;

namespace {

// Bitwise reflected CRC-32 (polynomial 0xEDB88320).
std::uint32_t crc32(std::string_view s) {
  std::uint32_t c = 0xffffffffu;
  for (unsigned char b : s) {
    c ^= b;
    for (int k = 0; k < 8; ++k) c = (c >> 1) ^ (0xedb88320u & (0u - (c & 1u)));
  }
  return ~c;
}

void reseal(std::string& bytes) {
  const std::uint32_t c = crc32(std::string_view(bytes).substr(0, bytes.size() - 4));
  for (int i = 0; i < 4; ++i) bytes[bytes.size() - 4 + i] = static_cast<char>((c >> (8 * i)) & 0xff);
}

std::string field_of(const std::string& bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    return e.field();
  }
  return "";
}

std::vector<PatchSet> data_for(const ModelConfig& cfg) {
  std::mt19937_64 rng(1);
  std::vector<PatchSet> out;
  for (int i = 0; i < 4; ++i) out.push_back(prepare_patches(PointCloud(oracle::random_points(cfg.num_points, rng)), cfg));
  return out;
}

void expect_same_params(const ParameterSet& a, const ParameterSet& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.items()[i].name, b.items()[i].name);
    EXPECT_TRUE(oracle::bit_equal(a.items()[i].tensor.data(), b.items()[i].tensor.data())) << a.items()[i].name;
  }
}

}  // namespace

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg.mask_query = MaskQueryMode::shared;
    cfg.fps_start = FpsStart::farthest;
    pretrain(state, data, 3);
  }
  ModelConfig cfg = tiny_config();
  std::vector<PatchSet> data = data_for(tiny_config());
  TrainState state = make_train_state(cfg, 7);
};

TEST_F(CheckpointTest, RoundTripIsBitExact) {
  const std::string bytes = serialize_checkpoint(state);
  EXPECT_EQ(bytes.substr(0, 8), "PCPRCKPT");
  const LoadedCheckpoint l = deserialize_checkpoint(bytes);
  EXPECT_TRUE(l.has_optimizer);
  EXPECT_TRUE(l.warnings.empty());
  EXPECT_EQ(l.state.model.config, state.model.config);
  EXPECT_EQ(l.state.model.target, ModelTarget::full_pretrain);
  EXPECT_EQ(l.state.step, 3u);
  EXPECT_EQ(l.state.seed, 7u);
  expect_same_params(l.state.model.params, state.model.params);
  EXPECT_EQ(l.state.optimizer.first_moments(), state.optimizer.first_moments());
  EXPECT_EQ(l.state.optimizer.second_moments(), state.optimizer.second_moments());
  EXPECT_EQ(l.state.optimizer.steps_taken(), 3u);
  EXPECT_EQ(serialize_checkpoint(l.state), bytes);
}

TEST_F(CheckpointTest, ResumedTrainingMatchesUninterrupted) {
  TrainState resumed = deserialize_checkpoint(serialize_checkpoint(state)).state;
  train_step(state, std::span<const PatchSet>(data).first(2));
  train_step(resumed, std::span<const PatchSet>(data).first(2));
  EXPECT_EQ(state.history.back().total, resumed.history.back().total);
  expect_same_params(state.model.params, resumed.model.params);
}

TEST_F(CheckpointTest, WeightsOnlyLoadsWithWarning) {
  const LoadedCheckpoint l = deserialize_checkpoint(serialize_checkpoint(state, false));
  EXPECT_FALSE(l.has_optimizer);
  ASSERT_EQ(l.warnings.size(), 1u);
  EXPECT_EQ(l.state.optimizer.steps_taken(), 0u);
  expect_same_params(l.state.model.params, state.model.params);
}

TEST_F(CheckpointTest, ClassifierModelRoundTrip) {
  ModelConfig c = tiny_config();
  const PointCprModel m = build_model(c, ModelTarget::classifier, 3);
  const LoadedCheckpoint l = deserialize_checkpoint(serialize_checkpoint(m));
  EXPECT_EQ(l.state.model.target, ModelTarget::classifier);
  expect_same_params(l.state.model.params, m.params);
}

TEST_F(CheckpointTest, CorruptionIsDetected) {
  const std::string good = serialize_checkpoint(state);
  std::string flipped = good;
  flipped[good.size() / 2] ^= 0x10;
  EXPECT_EQ(field_of(flipped), "checksum");

  std::string magic = good;
  magic[0] = 'X';
  EXPECT_EQ(field_of(magic), "magic");

  std::string version = good;
  version[8] = 2;
  reseal(version);
  EXPECT_EQ(field_of(version), "version");

  std::string target = good;
  target[12] = 9;
  reseal(target);
  EXPECT_EQ(field_of(target), "target");

  EXPECT_EQ(field_of(good.substr(0, good.size() - 1)), "checksum");
  EXPECT_EQ(field_of(""), "magic");
}

TEST_F(CheckpointTest, ResealedGarbageNeverEscapes) {
  const std::string good = serialize_checkpoint(state);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    std::string s = good;
    const int edits = 1 + static_cast<int>(rng() % 3);
    for (int e = 0; e < edits; ++e) s[12 + rng() % (s.size() - 16)] = static_cast<char>(rng() & 0xff);
    if (rng() % 2) s.erase(s.size() - 4 - 1 - rng() % 64, 1);
    reseal(s);
    try {
      deserialize_checkpoint(s);
    } catch (const CheckpointError&) {
    } catch (const std::exception& e) {
      FAIL() << "iteration " << i << ": " << e.what();
    }
  }
}

TEST_F(CheckpointTest, FileRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "pointcpr_ckpt_test.bin").string();
  save_checkpoint(path, state);
  expect_same_params(load_checkpoint(path).state.model.params, state.model.params);
  std::filesystem::remove(path);
  EXPECT_EQ([&] {
    try {
      load_checkpoint(path);
    } catch (const CheckpointError& e) {
      return e.field();
    }
    return std::string();
  }(), "path");
}
