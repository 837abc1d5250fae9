#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crl/model.hpp"

namespace crl {

// Versioned snapshot of a model plus trainer bookkeeping.
struct Checkpoint {
  ModelConfig config;
  std::vector<double> params;
  std::int64_t train_step = 0;
  std::string rng_state;
};

// Binary container: magic, version, config, step, RNG state, parameter
// payload, trailing FNV-1a checksum over everything before it.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint checkpoint_of(const SeqModel& model, std::int64_t train_step = 0,
                         std::string rng_state = {});
SeqModel model_from_checkpoint(const Checkpoint& ckpt);

// Guard for wiring checkpoints to corpora: throws DataError on mismatch.
void require_config(const Checkpoint& ckpt, const ModelConfig& expected);

}  // namespace crl
