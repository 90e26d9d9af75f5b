#pragma once

#include "obsimpact/model.hpp"
#include "obsimpact/scaler.hpp"

#include <string>

namespace obsimpact {

struct Checkpoint {
  ModelConfig config;
  ModelWeights weights;
  Scaler scaler;
};

/// Little-endian binary: magic "OBSW1", config block, then named tensors
/// (u64 name length, name bytes, u64 rows, u64 cols, row-major doubles).
void save_checkpoint(const std::string& path, const ModelWeights& weights,
                     const ModelConfig& config, const Scaler& scaler);

/// Throws std::runtime_error on bad magic, truncation, or shape mismatch.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace obsimpact
