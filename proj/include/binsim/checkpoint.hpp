#pragma once

#include <optional>
#include <string>

#include "binsim/graph.hpp"
#include "binsim/model.hpp"
#include "binsim/tokenizer.hpp"

namespace binsim {

inline constexpr int kCheckpointVersion = 1;

// A checkpoint is a binary parameter blob at `path` plus a JSON sidecar at
// `path + ".json"` holding the model and graph configuration, the vocabulary
// hash and the format version.
void save_checkpoint(const std::string& path, const Model& model, const GraphConfig& graph_cfg,
                     const Vocab& vocab,
                     std::optional<double> train_seconds_per_epoch = std::nullopt);

struct LoadedCheckpoint {
  Model model;
  GraphConfig graph_config;
  std::string vocab_hash;
  std::optional<double> train_seconds_per_epoch;
};

// Throws InputError when files are missing or the vocabulary hash differs.
LoadedCheckpoint load_checkpoint(const std::string& path, const Vocab& vocab);

}  // namespace binsim
