#pragma once

// Pseudo-anomaly synthesis: thresholded Perlin-noise masks and opacity
// blending of an external texture into a normal image.
//
// All functions take an explicit random source and are safe to call from
// parallel loaders as long as each worker owns its own Rng.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <torch/types.h>

#include "adl/image.hpp"
#include "adl/rng.hpp"

namespace adl::synth {

/// Binary [H, W] float mask with entries exactly 0 or 1.
class AnomalyMask {
 public:
  /// Throws std::invalid_argument unless `values` is 2-D and binary.
  explicit AnomalyMask(torch::Tensor values);

  static AnomalyMask zeros(int64_t height, int64_t width);

  const torch::Tensor& values() const { return values_; }
  int64_t height() const { return values_.size(0); }
  int64_t width() const { return values_.size(1); }
  /// Fraction of pixels set to one.
  double coverage() const;
  bool any() const;

 private:
  torch::Tensor values_;
};

struct BlendSpec {
  double beta_min = 0.1;
  double beta_max = 1.0;
  /// Candidate lattice periods, drawn independently per axis.
  std::vector<int> perlin_periods = {2, 4, 8, 16};
  /// Applied to noise rescaled to [0, 1]; a pixel is masked when noise > threshold.
  double binarize_threshold = 0.5;
  /// Random 90-degree rotations / flips of the source before blending.
  bool augment_source = true;

  void validate() const;
};

/// 2-D gradient noise on a (period_y x period_x) lattice, rescaled from its
/// analytic range [-sqrt(2)/2, sqrt(2)/2] to [0, 1]. Shape [height, width], float64.
torch::Tensor perlin_noise(int64_t height, int64_t width, int period_y, int period_x, Rng& rng);

AnomalyMask generate_perlin_mask(int64_t height, int64_t width, Rng& rng, const BlendSpec& spec);

/// I_p = (1 - M) * I + beta * (M * I_s) + (1 - beta) * (M * I).
/// `normal` and `source` are [C, H, W]; mask is [H, W]. beta must lie in [0, 1].
torch::Tensor blend_pseudo_anomaly(const torch::Tensor& normal, const torch::Tensor& source,
                                   const AnomalyMask& mask, double beta);

/// Pool of external texture images used as anomaly sources.
class TextureCorpus {
 public:
  /// Recursively indexes image files under `dir` (sorted, so indexing is
  /// reproducible). Throws ConfigError when no image files are found.
  static TextureCorpus from_directory(const std::filesystem::path& dir, ImageGeometry geometry);
  /// In-memory corpus of [3, H, W] images. Throws ConfigError when empty.
  static TextureCorpus from_images(std::vector<torch::Tensor> images);

  std::size_t size() const;
  /// Decodes a uniformly drawn entry. Unreadable files are logged, excluded
  /// and a new entry is drawn; ConfigError once nothing readable is left.
  torch::Tensor sample(Rng& rng) const;
  /// Index that the next sample() call would start from. Exposed for tests.
  std::size_t draw_index(Rng& rng) const;

 private:
  TextureCorpus() = default;

  std::vector<std::filesystem::path> paths_;
  std::vector<torch::Tensor> images_;
  ImageGeometry geometry_{};
  mutable std::vector<bool> unreadable_;
};

torch::Tensor sample_source_image(const TextureCorpus& corpus, Rng& rng);

struct PseudoAnomaly {
  torch::Tensor image;
  AnomalyMask mask;
  double beta;
};

/// Generates one pseudo-anomaly per call from a normal image: fresh Perlin
/// mask, fresh source texture and a beta drawn per image.
class PseudoAnomalySynth {
 public:
  PseudoAnomalySynth(BlendSpec spec, std::shared_ptr<const TextureCorpus> corpus);

  PseudoAnomaly make(const torch::Tensor& normal, Rng& rng) const;
  const BlendSpec& spec() const { return spec_; }

 private:
  BlendSpec spec_;
  std::shared_ptr<const TextureCorpus> corpus_;
};

}  // namespace adl::synth
