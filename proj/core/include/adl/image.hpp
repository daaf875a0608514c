#pragma once

#include <filesystem>
#include <optional>

#include <torch/types.h>

namespace adl {

/// Square resize followed by a centered square crop.
struct ImageGeometry {
  int resize = 256;
  int crop = 224;
};

/// Decodes an image file into a float tensor of shape [3, crop, crop] with
/// RGB values in [0, 1]. Returns nullopt if the file cannot be decoded.
std::optional<torch::Tensor> try_load_image(const std::filesystem::path& path,
                                            const ImageGeometry& geometry);

/// Same as try_load_image but throws ConfigError on failure.
torch::Tensor load_image(const std::filesystem::path& path, const ImageGeometry& geometry);

/// Loads a ground-truth mask as a [crop, crop] float tensor with entries in {0, 1}.
/// Nearest-neighbour resize keeps the mask binary.
torch::Tensor load_mask(const std::filesystem::path& path, const ImageGeometry& geometry);

/// Bilinear resize of a [3, H, W] image to [3, height, width].
torch::Tensor resize_image(const torch::Tensor& image, int height, int width);

/// Writes a [3, H, W] image or an [H, W] map in [0, 1] as an 8-bit PNG.
void save_png(const std::filesystem::path& path, const torch::Tensor& image);

bool is_image_file(const std::filesystem::path& path);

}  // namespace adl
