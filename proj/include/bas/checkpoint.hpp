#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "bas/model.hpp"

namespace bas {

/// Header metadata stored alongside the raw parameter tensors. The rng
/// scheme is counter-based, so (seed, epoch, step) fully determines every
/// stream used during training.
struct CheckpointMeta {
  int input_size = 0;
  int epoch = 0;
  int step_in_epoch = 0;
  long long global_step = 0;
  std::uint64_t seed = 0;
  std::string metrics_json = "{}";  // latest metric snapshot
};

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::unique_ptr<BASModel> model;
  bool has_momentum = false;
};

/// Single binary archive: magic, format version, JSON header, then the raw
/// little-endian float64 tensors in header order.
void save_checkpoint(const std::filesystem::path &path, BASModel &model,
                     const CheckpointMeta &meta, bool include_momentum = true);

LoadedCheckpoint load_checkpoint(const std::filesystem::path &path);

}  // namespace bas
