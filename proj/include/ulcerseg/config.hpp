#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ulcerseg/ensemble.hpp"
#include "ulcerseg/geometry.hpp"
#include "ulcerseg/metrics.hpp"
#include "ulcerseg/postprocess.hpp"
#include "ulcerseg/predictor.hpp"

namespace ulcerseg {

// One ensemble member as declared in the config file.
struct ModelDecl {
  std::string family;
  std::string kind;  // "constant" | "toy" | "file"
  std::string name;
  double weight = 1.0;
  double value = 0.0;                 // constant
  std::filesystem::path model;        // toy: model JSON
  std::filesystem::path directory;    // file: map directory
  std::filesystem::path manifest;     // file: id list (defaults to the dataset ids)
};

// JSON configuration shared by every CLI command. Unknown keys are rejected.
// Relative paths are resolved against the config file's directory.
struct PipelineConfig {
  int canvas = 512;
  std::uint64_t seed = 0;
  int folds = 5;
  int workers = 0;
  std::filesystem::path train_data;
  std::filesystem::path test_data;
  PostprocessConfig postprocess;
  std::optional<std::vector<TtaVariant>> tta = all_variants();
  TrainingSchedule training;
  LossConfig loss;
  AugmentationConfig augmentation;
  std::vector<ModelDecl> models;

  void validate() const;
  // Settings that shape outputs; embedded in inference logs and reports.
  nlohmann::json echo() const;
};

// Throws ConfigError on syntax errors, unknown keys, wrong types or invalid
// values.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

// Instantiates the declared predictors grouped by family (declaration order).
// `default_ids` serves file predictors that have no manifest. Throws
// ConfigError when no models are declared and DataError on unreadable inputs.
EnsembleSpec build_ensemble(const PipelineConfig& cfg, const std::vector<std::string>& default_ids);

}  // namespace ulcerseg
