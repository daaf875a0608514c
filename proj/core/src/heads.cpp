#include "adl/heads.hpp"

#include <cmath>
#include <stdexcept>

#include <torch/torch.h>

namespace adl {
namespace F = torch::nn::functional;

ScoringNetImpl::ScoringNetImpl(int64_t in_channels, int64_t hidden) {
  reduce = register_module("reduce", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, hidden, 1)));
  project = register_module("project", torch::nn::Conv2d(torch::nn::Conv2dOptions(hidden, 1, 1)));
}

torch::Tensor ScoringNetImpl::forward(const torch::Tensor& f_co) {
  auto scores = project(torch::relu(reduce(f_co)));
  return scores.flatten(1);
}

int64_t topk_count(int64_t n, double k_fraction) {
  if (!(k_fraction > 0.0 && k_fraction <= 1.0)) {
    throw std::invalid_argument("k_fraction must lie in (0, 1]");
  }
  if (n <= 0) throw std::invalid_argument("top-K needs a nonempty score map");
  const auto k = static_cast<int64_t>(std::ceil(k_fraction * static_cast<double>(n)));
  return std::clamp<int64_t>(k, 1, n);
}

torch::Tensor topk_score(const torch::Tensor& scores, double k_fraction) {
  const int64_t k = topk_count(scores.size(-1), k_fraction);
  auto [top, index] = torch::topk(scores, k, /*dim=*/-1, /*largest=*/true, /*sorted=*/true);
  return top.mean(-1);
}

ClassifierHeadImpl::ClassifierHeadImpl(int64_t in_channels) {
  fc = register_module("fc", torch::nn::Linear(in_channels, 1));
}

torch::Tensor ClassifierHeadImpl::logits(const torch::Tensor& f_last) {
  return fc(f_last.mean({2, 3})).squeeze(-1);
}

torch::Tensor ClassifierHeadImpl::forward(const torch::Tensor& f_last) {
  return torch::sigmoid(logits(f_last));
}

SegmentationHeadImpl::SegmentationHeadImpl(int64_t in_channels, int64_t width) {
  blocks = torch::nn::Sequential();
  int64_t channels = in_channels;
  for (int i = 0; i < 3; ++i) {
    blocks->push_back(torch::nn::Upsample(torch::nn::UpsampleOptions()
                                              .scale_factor(std::vector<double>{2.0, 2.0})
                                              .mode(torch::kBilinear)
                                              .align_corners(false)));
    blocks->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, width, 3).padding(1)));
    blocks->push_back(torch::nn::ReLU());
    channels = width;
  }
  blocks = register_module("blocks", blocks);
  head = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(width, 1, 1)));
}

torch::Tensor SegmentationHeadImpl::forward(const torch::Tensor& f_co, int64_t out_height,
                                            int64_t out_width) {
  auto logits = head(blocks->forward(f_co));
  if (logits.size(2) != out_height || logits.size(3) != out_width) {
    logits = F::interpolate(logits, F::InterpolateFuncOptions()
                                        .size(std::vector<int64_t>{out_height, out_width})
                                        .mode(torch::kBilinear)
                                        .align_corners(false));
  }
  return torch::sigmoid(logits);
}

}  // namespace adl
