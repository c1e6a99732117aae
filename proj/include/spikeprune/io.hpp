#pragma once

#include <optional>
#include <string>

#include "spikeprune/model.hpp"
#include "spikeprune/search.hpp"
#include "spikeprune/training.hpp"

namespace sp {

struct RunConfig {
  ModelConfig model;
  ScorerConfig scorer;
  std::optional<PruneSchedule> schedule;  // absent or "none" in the file
  TrainConfig train;
  SearchSpace search;
  DataConfig data;
  std::optional<std::string> data_dir;  // load dataset from files instead of generating
  std::string fingerprint;              // FNV-1a of the source document
};

// Strict JSON config: unknown keys are rejected by name, cross-field
// consistency (schedule length vs num_blocks, ...) validated.
// SPIKEPRUNE_SEED in the environment overrides train.seed.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& json_text);

std::string config_fingerprint(const std::string& json_text);

// Flat binary weight archive: magic "SPKW", u16 version, entry table
// (name, dtype, shape), little-endian f32 payload, row-major per entry.
void save_weights(const ModelWeights& w, const std::string& path);
// `w` must be initialized for the target config; names and shapes are checked.
void load_weights(ModelWeights& w, const std::string& path);

// Raw f32 image block plus a JSON manifest per split.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// {"schedule": [...]} documents, as emitted by the search command.
void save_schedule(const PruneSchedule& s, double batch_accuracy, const std::string& path,
                   const std::string& fingerprint);
PruneSchedule load_schedule(const std::string& path);

// Dataset for a run: from data_dir when set, otherwise generated from spec.
Dataset train_split(const RunConfig& rc);
Dataset eval_split(const RunConfig& rc);

}  // namespace sp
