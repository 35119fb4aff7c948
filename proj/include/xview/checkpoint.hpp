#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "xview/config.hpp"

namespace xview::harness {

constexpr int kCheckpointVersion = 1;

// Persisted training state: parameters, optimizer moments, the config
// snapshot, the RNG state and the training scene ids (for the contamination
// guard). Directory layout: manifest.txt + params.blob, save/load/save is
// byte-identical.
struct Checkpoint {
  int version = kCheckpointVersion;
  int64_t step = 0;
  std::array<uint64_t, 4> rng_state{};
  TrainConfig cfg;
  num::ParamSet params;
  num::OptimState opt;
  std::vector<int64_t> train_scene_ids;
};

void save_checkpoint(const std::string& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace xview::harness
