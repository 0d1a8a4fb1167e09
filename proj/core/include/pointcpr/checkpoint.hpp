#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointcpr/pretrain.hpp"

namespace pointcpr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout (little endian):
///   "PCPRCKPT" u32 version u32 target
///   u64 config-length, config text
///   u64 step u64 seed
///   u64 parameter-count, then per parameter:
///     u32 name-length, name, u32 rank, u64 extents[rank], f64 values
///   u8 has-optimizer [u64 adam-steps, per parameter f64 m[], f64 v[]]
///   u32 CRC-32 of every preceding byte
std::string serialize_checkpoint(const TrainState& state, bool include_optimizer = true);
std::string serialize_checkpoint(const PointCprModel& model);

struct LoadedCheckpoint {
  TrainState state;
  bool has_optimizer = false;
  std::vector<std::string> warnings;
};

/// Throws CheckpointError naming the offending field (magic, checksum,
/// version, config, params, optimizer, ...).
LoadedCheckpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const TrainState& state, bool include_optimizer = true);
void save_checkpoint(const std::string& path, const PointCprModel& model);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace pointcpr
