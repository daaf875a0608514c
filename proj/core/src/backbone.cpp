#include "adl/backbone.hpp"

#include <algorithm>
#include <regex>

#include <torch/torch.h>

#include "adl/errors.hpp"

namespace adl {
namespace F = torch::nn::functional;

void EncoderConfig::validate() const {
  if (selected_stages.empty()) throw ConfigError("encoder: selected stages must be nonempty");
  for (std::size_t i = 0; i < selected_stages.size(); ++i) {
    if (selected_stages[i] < 1 || selected_stages[i] > 4) {
      throw ConfigError("encoder: stage ids must be within 1..4");
    }
    if (i > 0 && selected_stages[i] <= selected_stages[i - 1]) {
      throw ConfigError("encoder: stages must be ordered shallow to deep without repeats");
    }
  }
  if (input_resolution <= 0) throw ConfigError("encoder: input resolution must be positive");
}

BasicBlockImpl::BasicBlockImpl(int64_t in_channels, int64_t out_channels, int64_t stride) {
  using torch::nn::Conv2dOptions;
  conv1 = register_module(
      "conv1", torch::nn::Conv2d(Conv2dOptions(in_channels, out_channels, 3)
                                     .stride(stride)
                                     .padding(1)
                                     .bias(false)));
  bn1 = register_module("bn1", torch::nn::BatchNorm2d(out_channels));
  conv2 = register_module(
      "conv2",
      torch::nn::Conv2d(Conv2dOptions(out_channels, out_channels, 3).padding(1).bias(false)));
  bn2 = register_module("bn2", torch::nn::BatchNorm2d(out_channels));
  if (stride != 1 || in_channels != out_channels) {
    downsample = register_module(
        "downsample",
        torch::nn::Sequential(
            torch::nn::Conv2d(Conv2dOptions(in_channels, out_channels, 1).stride(stride).bias(false)),
            torch::nn::BatchNorm2d(out_channels)));
  }
}

torch::Tensor BasicBlockImpl::forward(const torch::Tensor& x) {
  auto out = torch::relu(bn1(conv1(x)));
  out = bn2(conv2(out));
  auto identity = downsample ? downsample->forward(x) : x;
  return torch::relu(out + identity);
}

ResNetEncoder::ResNetEncoder(std::vector<int> blocks_per_stage, int64_t base_width)
    : base_width_(base_width) {
  using torch::nn::Conv2dOptions;
  conv1 = register_module(
      "conv1",
      torch::nn::Conv2d(Conv2dOptions(3, base_width, 7).stride(2).padding(3).bias(false)));
  bn1 = register_module("bn1", torch::nn::BatchNorm2d(base_width));
  int64_t in_channels = base_width;
  for (int s = 0; s < 4; ++s) {
    const int64_t out_channels = base_width << s;
    torch::nn::Sequential layer;
    for (int b = 0; b < blocks_per_stage[static_cast<std::size_t>(s)]; ++b) {
      const int64_t stride = (b == 0 && s > 0) ? 2 : 1;
      layer->push_back(BasicBlock(in_channels, out_channels, stride));
      in_channels = out_channels;
    }
    layers_.push_back(register_module("layer" + std::to_string(s + 1), layer));
  }
  for (auto& module : modules(/*include_self=*/false)) {
    if (auto* conv = module->as<torch::nn::Conv2d>()) {
      torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanOut, torch::kReLU);
    }
  }
}

std::vector<torch::Tensor> ResNetEncoder::stage_maps(const torch::Tensor& normalized) {
  auto x = torch::relu(bn1(conv1(normalized)));
  x = F::max_pool2d(x, F::MaxPool2dFuncOptions(3).stride(2).padding(1));
  std::vector<torch::Tensor> maps;
  maps.reserve(layers_.size());
  for (auto& layer : layers_) {
    x = layer->forward(x);
    maps.push_back(x);
  }
  return maps;
}

int64_t ResNetEncoder::stage_channels(int stage) const { return base_width_ << (stage - 1); }

int64_t ResNetEncoder::stage_size(int stage, int64_t input) const {
  auto halve = [](int64_t n) { return n <= 0 ? int64_t{0} : (n - 1) / 2 + 1; };
  int64_t n = halve(halve(input));  // stem conv + max-pool
  for (int s = 2; s <= stage; ++s) n = halve(n);
  return n;
}

void ResNetEncoder::load_weights(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("backbone weights not found: " + path.string());
  torch::serialize::InputArchive archive;
  archive.load_from(path.string());
  torch::NoGradGuard no_grad;
  load(archive);
}

std::shared_ptr<Encoder> make_encoder(const EncoderConfig& config) {
  config.validate();
  static const std::regex kNamePattern(R"(resnet(18|34)(?:_w(\d+))?)");
  std::smatch match;
  if (!std::regex_match(config.backbone, match, kNamePattern)) {
    throw ConfigError("unknown backbone '" + config.backbone +
                      "' (expected resnet18, resnet34 or resnet18_w<base>)");
  }
  std::vector<int> blocks = match[1] == "18" ? std::vector<int>{2, 2, 2, 2}
                                             : std::vector<int>{3, 4, 6, 3};
  const int64_t width = match[2].matched ? std::stoll(match[2].str()) : 64;
  if (width < 1) throw ConfigError("backbone base width must be >= 1");
  auto encoder = std::make_shared<ResNetEncoder>(std::move(blocks), width);
  if (!config.weights.empty()) encoder->load_weights(config.weights);
  return encoder;
}

torch::Tensor normalize_imagenet(const torch::Tensor& images) {
  const auto opts = images.options();
  const auto mean = torch::tensor({0.485, 0.456, 0.406}, opts).view({1, 3, 1, 1});
  const auto std = torch::tensor({0.229, 0.224, 0.225}, opts).view({1, 3, 1, 1});
  return (images - mean) / std;
}

FeatureBundle fuse_stage_maps(const std::vector<torch::Tensor>& selected) {
  if (selected.empty()) throw std::invalid_argument("fuse_stage_maps: no stage maps");
  int64_t height = 0;
  int64_t width = 0;
  for (const auto& map : selected) {
    height = std::max(height, map.size(2));
    width = std::max(width, map.size(3));
  }
  std::vector<torch::Tensor> resized;
  resized.reserve(selected.size());
  for (const auto& map : selected) {
    if (map.size(2) == height && map.size(3) == width) {
      resized.push_back(map);
    } else {
      resized.push_back(F::interpolate(map, F::InterpolateFuncOptions()
                                                .size(std::vector<int64_t>{height, width})
                                                .mode(torch::kBilinear)
                                                .align_corners(false)));
    }
  }
  auto f_co = resized.size() == 1 ? resized.front() : torch::cat(resized, 1);
  return {f_co, selected.back()};
}

FeatureBundle encode(Encoder& encoder, const torch::Tensor& image_batch, const EncoderConfig& config) {
  config.validate();
  const int deepest = config.selected_stages.back();
  if (encoder.stage_size(deepest, config.input_resolution) < 1 ||
      config.input_resolution < (int64_t{1} << (deepest + 1))) {
    throw ConfigError("input resolution " + std::to_string(config.input_resolution) +
                      " is too small for stage " + std::to_string(deepest));
  }
  if (image_batch.dim() != 4 || image_batch.size(1) != 3 ||
      image_batch.size(2) != config.input_resolution ||
      image_batch.size(3) != config.input_resolution) {
    throw std::invalid_argument("encode: expected a [B,3,R,R] batch at the configured resolution");
  }
  auto maps = encoder.stage_maps(normalize_imagenet(image_batch));
  std::vector<torch::Tensor> selected;
  for (int stage : config.selected_stages) selected.push_back(maps[static_cast<std::size_t>(stage - 1)]);
  return fuse_stage_maps(selected);
}

void set_trainable(Encoder& encoder, const EncoderConfig& config) {
  for (auto& p : encoder.parameters()) p.requires_grad_(config.finetune);
}

}  // namespace adl
