#pragma once

// Run configuration: one flat key space shared by JSON snapshots, YAML files
// and CLI overrides. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "adl/data_pipeline.hpp"
#include "adl/model.hpp"
#include "adl/noise_synth.hpp"
#include "adl/toy_data.hpp"
#include "adl/trainer.hpp"

namespace adl {

struct DataConfig {
  data::DatasetKind dataset = data::DatasetKind::toy;
  /// Dataset root on disk. For the toy kind an empty root means "generate in memory".
  std::filesystem::path root;
  std::string category = "toy";
  ImageGeometry geometry{};
  data::ToySpec toy{};
};

struct RunConfig {
  DataConfig data;
  double epsilon = 0.1;
  double noise_sigma = 0.1;
  /// Contamination draw; defaults to a stream derived from train.seed.
  std::optional<std::uint64_t> contamination_seed;
  synth::BlendSpec blend;
  /// Texture images for pseudo-anomalies; empty -> procedural textures.
  std::filesystem::path texture_dir;
  int procedural_textures = 16;
  ModelConfig model;
  TrainConfig train;

  /// Side length of the images fed to the network.
  int image_size() const;
  data::ContaminationSpec contamination() const;

  /// Range checks across all parts; throws ConfigError.
  void validate() const;

  nlohmann::json to_json() const;
  /// Applies the keys of `j` on top of `base`. Throws ConfigError on unknown
  /// keys or ill-typed values.
  static RunConfig from_json(const nlohmann::json& j, RunConfig base);
  static RunConfig from_json(const nlohmann::json& j);
};

/// Parses a .json, .yaml or .yml file into JSON.
nlohmann::json load_structured_file(const std::filesystem::path& path);

/// Base config for small CPU runs on the synthetic set.
RunConfig toy_run_config();

}  // namespace adl
