#include "adl/image.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <string>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "adl/errors.hpp"

namespace adl {
namespace {

cv::Mat resize_and_crop(const cv::Mat& src, const ImageGeometry& g, int interpolation) {
  if (g.resize <= 0 || g.crop <= 0 || g.crop > g.resize) {
    throw std::invalid_argument("image geometry requires 0 < crop <= resize");
  }
  cv::Mat resized;
  cv::resize(src, resized, cv::Size(g.resize, g.resize), 0, 0, interpolation);
  const int offset = (g.resize - g.crop) / 2;
  return resized(cv::Rect(offset, offset, g.crop, g.crop)).clone();
}

}  // namespace

bool is_image_file(const std::filesystem::path& path) {
  static constexpr std::array<std::string_view, 8> kExtensions = {
      ".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".ppm", ".pgm"};
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return std::find(kExtensions.begin(), kExtensions.end(), ext) != kExtensions.end();
}

std::optional<torch::Tensor> try_load_image(const std::filesystem::path& path,
                                            const ImageGeometry& geometry) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) return std::nullopt;
  cv::Mat rgb;
  cv::cvtColor(resize_and_crop(bgr, geometry, cv::INTER_LINEAR), rgb, cv::COLOR_BGR2RGB);
  cv::Mat as_float;
  rgb.convertTo(as_float, CV_32FC3, 1.0 / 255.0);
  auto hwc = torch::from_blob(as_float.data, {as_float.rows, as_float.cols, 3}, torch::kFloat32);
  return hwc.permute({2, 0, 1}).contiguous().clone();
}

torch::Tensor load_image(const std::filesystem::path& path, const ImageGeometry& geometry) {
  auto image = try_load_image(path, geometry);
  if (!image) throw ConfigError("cannot decode image: " + path.string());
  return *image;
}

torch::Tensor load_mask(const std::filesystem::path& path, const ImageGeometry& geometry) {
  cv::Mat gray = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw ConfigError("cannot decode mask: " + path.string());
  cv::Mat cropped = resize_and_crop(gray, geometry, cv::INTER_NEAREST);
  auto hw = torch::from_blob(cropped.data, {cropped.rows, cropped.cols}, torch::kUInt8);
  return (hw > 127).to(torch::kFloat32).clone();
}

torch::Tensor resize_image(const torch::Tensor& image, int height, int width) {
  if (image.size(1) == height && image.size(2) == width) return image;
  namespace F = torch::nn::functional;
  return F::interpolate(image.unsqueeze(0),
                        F::InterpolateFuncOptions()
                            .size(std::vector<int64_t>{height, width})
                            .mode(torch::kBilinear)
                            .align_corners(false))
      .squeeze(0)
      .clamp(0.0, 1.0);
}

void save_png(const std::filesystem::path& path, const torch::Tensor& image) {
  auto bytes = (image.detach().to(torch::kFloat32).clamp(0.0, 1.0) * 255.0)
                   .round()
                   .to(torch::kUInt8)
                   .contiguous();
  cv::Mat out;
  if (bytes.dim() == 2) {
    out = cv::Mat(static_cast<int>(bytes.size(0)), static_cast<int>(bytes.size(1)), CV_8UC1,
                  bytes.data_ptr<uint8_t>())
              .clone();
  } else if (bytes.dim() == 3 && bytes.size(0) == 3) {
    auto hwc = bytes.permute({1, 2, 0}).contiguous();
    cv::Mat rgb(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3,
                hwc.data_ptr<uint8_t>());
    cv::cvtColor(rgb, out, cv::COLOR_RGB2BGR);
  } else {
    throw std::invalid_argument("save_png expects [3,H,W] or [H,W]");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), out)) throw ConfigError("cannot write image: " + path.string());
}

}  // namespace adl
