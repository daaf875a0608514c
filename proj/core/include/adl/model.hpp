#pragma once

#include <memory>

#include <torch/nn/module.h>
#include <torch/nn/pimpl.h>
#include <torch/types.h>

#include "adl/backbone.hpp"
#include "adl/heads.hpp"

namespace adl {

struct ModelConfig {
  EncoderConfig encoder;
  HeadConfig heads;
};

struct HeadOutputs {
  torch::Tensor score_map;     // [B, N] per-location scores
  torch::Tensor psi_k;         // [B] top-K anomaly score
  torch::Tensor anomaly_prob;  // [B] p(x)
  torch::Tensor seg_mask;      // [B, 1, H_in, W_in]
};

/// Encoder plus the scoring, classification and segmentation heads.
class AdlModelImpl : public torch::nn::Module {
 public:
  explicit AdlModelImpl(ModelConfig config);

  HeadOutputs forward(const torch::Tensor& images);
  FeatureBundle features(const torch::Tensor& images);

  /// A frozen encoder stays in eval mode so its batch-norm statistics do not drift.
  void train(bool on = true) override;
  void set_finetune(bool finetune);

  const ModelConfig& config() const { return config_; }
  Encoder& encoder() { return *encoder_; }
  ScoringNet& scorer() { return scorer_; }
  ClassifierHead& classifier() { return classifier_; }
  SegmentationHead& segmenter() { return segmenter_; }

 private:
  ModelConfig config_;
  std::shared_ptr<Encoder> encoder_;
  ScoringNet scorer_{nullptr};
  ClassifierHead classifier_{nullptr};
  SegmentationHead segmenter_{nullptr};
};
TORCH_MODULE(AdlModel);

}  // namespace adl
