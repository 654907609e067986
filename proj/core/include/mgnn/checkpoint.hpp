#pragma once

#include <cstdint>
#include <string>

#include "mgnn/encoder.hpp"
#include "mgnn/event_log.hpp"
#include "mgnn/training.hpp"

namespace mgnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainConfig config;
  Vocabulary vocab;
  ModelParams params;
};

/// Binary layout, little-endian:
///   "MGNC" | u32 version | u64 d | u64 |V| | u32 K | u32 L | u64 seed
///   | u32-length-prefixed config JSON
///   | u64 key count, then u32-length-prefixed keys (dense index order)
///   | embed f32 x |V|d | gate f32 x 2d | bilinear f32 x d^2
/// A pretty-printed copy of the config is written to `path + ".json"`.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Rounds every parameter to the nearest float, the precision a checkpoint stores.
ModelParams round_to_float(ModelParams params);

}  // namespace mgnn
