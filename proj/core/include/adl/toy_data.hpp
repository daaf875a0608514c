#pragma once

// Synthetic two-class image sets for smoke tests and desk-scale runs: flat,
// lightly grained surfaces as normals, the same surfaces with blob defects as
// anomalies, plus a small pool of procedural textures for pseudo-anomalies.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/types.h>

#include "adl/data_pipeline.hpp"

namespace adl::data {

struct ToySpec {
  int image_size = 64;
  int n_train = 64;
  int n_test_normal = 32;
  int n_test_anomalous = 32;
  std::uint64_t seed = 7;
};

torch::Tensor make_toy_normal(int size, Rng& rng);
/// Adds one to three elliptical blobs; returns the image and its [H, W] mask.
std::pair<torch::Tensor, torch::Tensor> make_toy_anomaly(int size, Rng& rng);

CategoryData make_toy_category(const ToySpec& spec, const std::string& category = "toy");

std::vector<torch::Tensor> make_toy_textures(int count, int size, std::uint64_t seed);

/// Writes the toy category in the MVTec directory layout.
void write_toy_dataset(const std::filesystem::path& root, const std::string& category,
                       const ToySpec& spec);
void write_toy_textures(const std::filesystem::path& dir, int count, int size, std::uint64_t seed);

}  // namespace adl::data
