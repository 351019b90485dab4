#pragma once

// Checkpoint directory layout:
//   state.json     iteration, sampler RNG, loop config, component cache, history
//   pool.csv       cumulative synthetic pool
//   manifest.json  FNV-1a 64 hash of each file above

#include <filesystem>

#include "distsynth/loop.hpp"

namespace distsynth {

struct Checkpoint {
  LoopConfig config;
  LoopState state;
};

// Files are written to temporaries and renamed, manifest last, so an
// interrupted write leaves the previous checkpoint loadable or detected.
// Errors: IoFailure.
void save_checkpoint(const std::filesystem::path& dir, const LoopConfig& config, const LoopState& state);

// Errors: CorruptCheckpoint (missing files, hash mismatch, unreadable state),
// SchemaMismatch when the pool was written for another schema.
Checkpoint load_checkpoint(const std::filesystem::path& dir, const VariableSchema& schema);

}  // namespace distsynth
