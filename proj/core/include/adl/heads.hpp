#pragma once

// Heads that consume encoder features: the per-location anomaly scorer with
// top-K aggregation, the anomaly classification head producing p(x), and the
// segmentation decoder producing M_o.

#include <cstdint>

#include <torch/nn/module.h>
#include <torch/nn/modules/container/sequential.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/modules/linear.h>
#include <torch/types.h>

namespace adl {

struct HeadConfig {
  int64_t scorer_hidden = 128;
  int64_t decoder_width = 64;
  double k_fraction = 0.1;
};

/// Two 1x1 convolutions with a ReLU in between; one score per location.
class ScoringNetImpl : public torch::nn::Module {
 public:
  ScoringNetImpl(int64_t in_channels, int64_t hidden);
  /// [B, C, H, W] -> [B, H*W]
  torch::Tensor forward(const torch::Tensor& f_co);

 private:
  torch::nn::Conv2d reduce{nullptr}, project{nullptr};
};
TORCH_MODULE(ScoringNet);

/// K = max(1, ceil(k_fraction * n)). Throws std::invalid_argument unless
/// k_fraction is in (0, 1] and n > 0.
int64_t topk_count(int64_t n, double k_fraction);

/// Mean of the K largest scores along the last dimension: [B, N] -> [B]
/// (or [N] -> scalar). Differentiable; the gradient is 1/K on the selected entries.
torch::Tensor topk_score(const torch::Tensor& scores, double k_fraction);

/// Global average pooling, a linear map and a logistic squashing.
class ClassifierHeadImpl : public torch::nn::Module {
 public:
  explicit ClassifierHeadImpl(int64_t in_channels);
  /// [B, C, h, w] -> logits [B]
  torch::Tensor logits(const torch::Tensor& f_last);
  /// [B, C, h, w] -> probabilities [B]
  torch::Tensor forward(const torch::Tensor& f_last);

 private:
  torch::nn::Linear fc{nullptr};
};
TORCH_MODULE(ClassifierHead);

/// Three (x2 bilinear upsample, 3x3 conv, ReLU) blocks, a 1x1 conv to one
/// channel and a sigmoid; the result is resized to the requested output size.
class SegmentationHeadImpl : public torch::nn::Module {
 public:
  SegmentationHeadImpl(int64_t in_channels, int64_t width);
  /// [B, C, H, W] -> [B, 1, out_height, out_width] in [0, 1]
  torch::Tensor forward(const torch::Tensor& f_co, int64_t out_height, int64_t out_width);

 private:
  torch::nn::Sequential blocks{nullptr};
  torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(SegmentationHead);

}  // namespace adl
