#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsum/network.hpp"
#include "hsum/trainer.hpp"

namespace hsum {

// Everything one experiment needs. The JSON file is flat; each key maps to
// exactly one command-line flag ("--" + key with '_' replaced by '-').
struct ExperimentConfig {
  std::filesystem::path manifest;
  std::filesystem::path checkpoint_dir;
  ModelConfig model;
  TrainConfig train;  // train.eval carries the summary and metric protocol

  EvalOptions& eval() { return train.eval; }
  const EvalOptions& eval() const { return train.eval; }
  void validate() const;  // throws ConfigError
};

enum class FieldType { integer, number, boolean, string, path, number_list };

struct ConfigField {
  std::string key;
  FieldType type;
  std::string help;
  std::function<void(ExperimentConfig&, const nlohmann::json&)> set;
  std::function<nlohmann::json(const ExperimentConfig&)> get;

  std::string flag() const;
};

const std::vector<ConfigField>& config_fields();
const ConfigField& config_field(const std::string& key);  // throws ConfigError

// Type-checked assignment of one key; throws ConfigError for unknown keys
// or wrong types.
void apply_config_value(ExperimentConfig& config, const std::string& key,
                        const nlohmann::json& value);
// Parses a flag's textual value(s) into the JSON type of the field.
nlohmann::json parse_flag_value(const ConfigField& field, const std::vector<std::string>& text);

ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace hsum
