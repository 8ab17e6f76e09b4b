#ifndef AUNET_RUN_CONFIG_HPP
#define AUNET_RUN_CONFIG_HPP

#include "aunet/dataset.hpp"
#include "aunet/explain.hpp"
#include "aunet/model.hpp"
#include "aunet/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace aunet {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::filesystem::path root;
  std::vector<Modality> modalities{Modality::Flair, Modality::T1ce};
  SliceWindow window;
  Index image_size = 128;
  SplitRatios split;
  std::vector<std::string> exclusions = kDefaultExclusions;
  std::uint64_t split_seed = 42;
  LabelRemap remap;
};

/// Everything one run needs. Defaults follow docs/config.md.
struct RunConfig {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  GradCamConfig gradcam;
  std::filesystem::path output_dir = "runs/default";

  PipelineOptions pipeline() const;
  /// Checks values only; paths are checked by the commands that read them.
  void validate() const;
};

/// Missing keys keep their defaults; unknown keys and ill-typed values raise ConfigError.
/// model.in_channels follows data.modalities and gradcam output size follows
/// data.image_size. Relative paths are resolved against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Every key with its value, paths absolute. Feeding it back to parse_run_config
/// reproduces the same RunConfig.
nlohmann::json to_json(const RunConfig& config);

}  // namespace aunet

#endif  // AUNET_RUN_CONFIG_HPP
