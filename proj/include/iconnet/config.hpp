#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "iconnet/common.hpp"
#include "iconnet/dataset.hpp"
#include "iconnet/nn.hpp"
#include "iconnet/train.hpp"

namespace iconnet {

using Json = nlohmann::json;

/// Invalid configuration; path is a JSON pointer-like location such as
/// "$.training.batch_size".
class ConfigError : public InvalidArgument {
 public:
  ConfigError(std::string path, const std::string& message)
      : InvalidArgument(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class Precision { kFloat64, kFloat32 };

Precision parse_precision(std::string_view name);
std::string_view to_string(Precision precision);

/// Named architectures. variant applies to every block.
ModelConfig preset_model(std::string_view name, Variant variant, int num_classes);

struct DatasetSource {
  std::optional<std::filesystem::path> manifest;  // CSV path,label
  std::optional<SynthSpec> synth;
  std::uint64_t synth_seed = 0;
};

struct CvConfig {
  int folds = 5;
  double validation_fraction = 0.15;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DatasetSource dataset;
  std::optional<std::string> preset;
  std::optional<ModelConfig> architecture;
  std::optional<Variant> variant;
  Precision precision = Precision::kFloat64;
  TrainConfig training;
  CvConfig cv;

  /// Resolved architecture for a dataset with num_classes classes.
  ModelConfig model(int num_classes) const;
};

Json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const Json& json, const std::string& path = "$");

Json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const Json& json, const std::string& path = "$");

Json to_json(const TrainConfig& config);
Json to_json(const ExperimentConfig& config);

/// Relative paths inside the config resolve against base_dir.
ExperimentConfig experiment_config_from_json(const Json& json, const std::filesystem::path& base_dir = {});

/// Parses a file; syntax errors become ConfigError at "$".
Json read_json_file(const std::filesystem::path& path);

}  // namespace iconnet
