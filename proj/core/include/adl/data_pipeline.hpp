#pragma once

// Dataset ingestion, image-space contamination of the training split and
// minibatch assembly with on-the-fly pseudo-anomalies.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/types.h>

#include "adl/image.hpp"
#include "adl/noise_synth.hpp"
#include "adl/rng.hpp"

namespace adl::data {

enum class DatasetKind { mvtec, visa, toy };

DatasetKind parse_dataset_kind(const std::string& name);
std::string to_string(DatasetKind kind);

struct ImageSample {
  torch::Tensor image;        // [3, H, W] in [0, 1]
  int y_contaminated = 0;     // label seen by training
  int y_true = 0;             // audit / evaluation only
  bool is_pseudo = false;
  torch::Tensor gt_mask;      // [H, W] in {0, 1}
  std::string source;         // file path or generator id
  std::uint64_t noise_seed = 0;
};

struct CategoryData {
  std::string dataset;
  std::string category;
  std::vector<ImageSample> train_normals;
  std::vector<ImageSample> test_normals;
  std::vector<ImageSample> test_anomalies;
};

/// Reads one category of an MVTec-style or VisA (split csv) tree. Images are
/// resized and center-cropped per `geometry`; ordering is sorted by path.
/// Missing or empty directories raise ConfigError describing the expected layout.
CategoryData load_category(const std::filesystem::path& root, DatasetKind kind,
                           const std::string& category, const ImageGeometry& geometry);

struct ContaminationSpec {
  double epsilon = 0.1;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ManifestEntry {
  std::size_t index = 0;
  std::string source;
  int y_true = 0;
  bool disguised = false;
  std::uint64_t noise_seed = 0;
};

struct ContaminatedSet {
  std::vector<ImageSample> samples;
  std::vector<ManifestEntry> manifest;
  std::size_t n_disguised = 0;
  /// Disguised anomalies were drawn from a test split that is left intact.
  bool overlaps_test_set = false;

  nlohmann::json manifest_json(const ContaminationSpec& spec) const;
};

/// floor(epsilon * n) with a small guard against products like 0.29 * 100.
std::size_t contamination_count(std::size_t n, double epsilon);

/// Replaces floor(epsilon * n) randomly chosen normals by noisy copies of test
/// anomalies (labelled 0, y_true 1). Deterministic given spec.seed.
ContaminatedSet inject_contamination(const std::vector<ImageSample>& train_normals,
                                     const std::vector<ImageSample>& test_anomalies,
                                     const ContaminationSpec& spec);

/// floor(ratio * batch_size).
std::size_t pseudo_count(std::size_t batch_size, double pseudo_ratio);

/// Turns the last floor(ratio * B) entries of a minibatch drawn from X_N into
/// pseudo-anomalies (label 1, Perlin ground-truth mask); the others keep an
/// all-zero mask. Requires B >= 2 and 0 <= ratio < 1.
std::vector<ImageSample> make_training_batch(std::span<const ImageSample> x_n_samples,
                                             double pseudo_ratio,
                                             const synth::PseudoAnomalySynth& synth, Rng& rng);

struct StackedBatch {
  torch::Tensor images;  // [B, 3, H, W]
  torch::Tensor labels;  // [B] int64, y_contaminated
  torch::Tensor masks;   // [B, 1, H, W]
};

StackedBatch stack_batch(std::span<const ImageSample> batch);

}  // namespace adl::data
