#include "adl/model.hpp"

#include <torch/torch.h>

namespace adl {

AdlModelImpl::AdlModelImpl(ModelConfig config) : config_(std::move(config)) {
  config_.encoder.validate();
  encoder_ = register_module("encoder", make_encoder(config_.encoder));
  int64_t fused_channels = 0;
  for (int stage : config_.encoder.selected_stages) fused_channels += encoder_->stage_channels(stage);
  const int64_t last_channels = encoder_->stage_channels(config_.encoder.selected_stages.back());

  scorer_ = register_module("scorer", ScoringNet(fused_channels, config_.heads.scorer_hidden));
  classifier_ = register_module("classifier", ClassifierHead(last_channels));
  segmenter_ = register_module("segmenter", SegmentationHead(fused_channels, config_.heads.decoder_width));
  set_finetune(config_.encoder.finetune);
}

FeatureBundle AdlModelImpl::features(const torch::Tensor& images) {
  return encode(*encoder_, images, config_.encoder);
}

HeadOutputs AdlModelImpl::forward(const torch::Tensor& images) {
  auto bundle = features(images);
  HeadOutputs out;
  out.score_map = scorer_->forward(bundle.f_co);
  out.psi_k = topk_score(out.score_map, config_.heads.k_fraction);
  out.anomaly_prob = classifier_->forward(bundle.f_last);
  out.seg_mask = segmenter_->forward(bundle.f_co, images.size(2), images.size(3));
  return out;
}

void AdlModelImpl::train(bool on) {
  torch::nn::Module::train(on);
  encoder_->train(on && config_.encoder.finetune);
}

void AdlModelImpl::set_finetune(bool finetune) {
  config_.encoder.finetune = finetune;
  set_trainable(*encoder_, config_.encoder);
  encoder_->train(is_training() && finetune);
}

}  // namespace adl
