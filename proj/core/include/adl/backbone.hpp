#pragma once

// Multi-scale feature encoder. Stage maps from a residual backbone are
// bilinearly resized to the largest selected resolution and concatenated
// along channels (f_co); the deepest selected map is kept as-is (f_last).

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/batchnorm.h>
#include <torch/nn/modules/container/sequential.h>
#include <torch/nn/modules/conv.h>
#include <torch/types.h>

namespace adl {

struct FeatureBundle {
  torch::Tensor f_co;    // [B, sum(c_i), H_max, W_max]
  torch::Tensor f_last;  // [B, c_last, h_last, w_last]
};

struct EncoderConfig {
  /// "resnet18", "resnet34", or a width-reduced "resnet18_w<base>" (e.g. resnet18_w8).
  std::string backbone = "resnet18";
  /// Residual stage ids in 1..4, shallow to deep.
  std::vector<int> selected_stages = {2, 3, 4};
  int input_resolution = 224;
  bool finetune = true;
  /// Optional TorchScript archive with torchvision-named parameters.
  std::string weights;

  void validate() const;
};

/// Abstract encoder: produces the map of every stage for a batch of
/// channel-normalized images.
class Encoder : public torch::nn::Module {
 public:
  virtual std::vector<torch::Tensor> stage_maps(const torch::Tensor& normalized) = 0;
  virtual int num_stages() const = 0;
  /// Channel count of stage s (1-based).
  virtual int64_t stage_channels(int stage) const = 0;
  /// Spatial size of stage s for a square input of side `input`.
  virtual int64_t stage_size(int stage, int64_t input) const = 0;
};

class BasicBlockImpl : public torch::nn::Module {
 public:
  BasicBlockImpl(int64_t in_channels, int64_t out_channels, int64_t stride);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
  torch::nn::Sequential downsample{nullptr};
};
TORCH_MODULE(BasicBlock);

/// Torchvision-layout residual network without the classification head,
/// so parameter names (conv1.weight, layer2.0.downsample.1.running_mean, ...)
/// line up with exported torchvision checkpoints.
class ResNetEncoder : public Encoder {
 public:
  ResNetEncoder(std::vector<int> blocks_per_stage, int64_t base_width);

  std::vector<torch::Tensor> stage_maps(const torch::Tensor& normalized) override;
  int num_stages() const override { return 4; }
  int64_t stage_channels(int stage) const override;
  int64_t stage_size(int stage, int64_t input) const override;

  /// Copies parameters and buffers from a TorchScript archive by name.
  void load_weights(const std::filesystem::path& path);

 private:
  int64_t base_width_;
  torch::nn::Conv2d conv1{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr};
  std::vector<torch::nn::Sequential> layers_;
};

/// Builds the encoder named by config.backbone and loads weights if given.
std::shared_ptr<Encoder> make_encoder(const EncoderConfig& config);

/// ImageNet channel mean/std normalization of a [B, 3, H, W] batch in [0, 1].
torch::Tensor normalize_imagenet(const torch::Tensor& images);

/// Resizes (bilinear, align_corners=false) and concatenates the selected
/// stage maps. Maps already at the target size pass through untouched.
FeatureBundle fuse_stage_maps(const std::vector<torch::Tensor>& selected);

FeatureBundle encode(Encoder& encoder, const torch::Tensor& image_batch, const EncoderConfig& config);

/// Enables or freezes gradient flow through the encoder parameters.
void set_trainable(Encoder& encoder, const EncoderConfig& config);

}  // namespace adl
