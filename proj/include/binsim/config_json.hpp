#pragma once

// JSON mappings for configuration structs. Unknown keys are rejected.

#include <optional>
#include <string>

#include <json.hpp>

#include "binsim/graph.hpp"
#include "binsim/model.hpp"
#include "binsim/trainer.hpp"

namespace binsim {

void to_json(nlohmann::json& j, const GraphConfig& c);
void from_json(const nlohmann::json& j, GraphConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct RunPaths {
  std::string corpus;
  std::string vocab;
  std::string checkpoint;
  std::string train;
  std::string dev;
  std::string test;
  std::string queries;
  std::string out;

  bool operator==(const RunPaths&) const = default;
};

// Everything a reproducible run needs, as one file.
struct RunConfig {
  GraphConfig graph;
  ModelConfig model;
  TrainConfig train;
  std::optional<std::uint64_t> seed;
  RunPaths paths;

  bool operator==(const RunConfig&) const = default;
};

void to_json(nlohmann::json& j, const RunPaths& p);
void from_json(const nlohmann::json& j, RunPaths& p);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

std::string run_config_to_string(const RunConfig& c);
RunConfig run_config_from_string(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace binsim
